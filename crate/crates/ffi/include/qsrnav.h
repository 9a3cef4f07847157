/* C interface of the qsrnav guided-navigation library. */

#ifndef QSRNAV_H
#define QSRNAV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every C entry point. Anything but `Ok` leaves a message in the
 * thread-local error slot.
 */
typedef enum QsrnavStatus {
  QsrnavStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  QsrnavStatus_NullArg = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  QsrnavStatus_InvalidUtf8 = 2,
  /**
   * The scenario failed to parse or validate.
   */
  QsrnavStatus_Config = 3,
  /**
   * An episode or batch failed to run.
   */
  QsrnavStatus_Episode = 4,
  /**
   * A file could not be read or written.
   */
  QsrnavStatus_Io = 5,
  /**
   * A panic was caught at the boundary.
   */
  QsrnavStatus_Panic = 6,
} QsrnavStatus;

/**
 * Why an episode ended unsuccessfully.
 */
typedef enum QsrnavFailure {
  QsrnavFailure_None = 0,
  /**
   * Simulated time exceeded the configured budget.
   */
  QsrnavFailure_Timeout = 1,
  /**
   * No consistent world model within the retry budget.
   */
  QsrnavFailure_ModelFail = 2,
  /**
   * Particle weights collapsed and the reinitialization budget ran out.
   */
  QsrnavFailure_Degenerate = 3,
} QsrnavFailure;

/**
 * Opaque scenario handle.
 */
typedef struct QsrnavScenario QsrnavScenario;

/**
 * Outcome of a single episode.
 */
typedef struct QsrnavEpisodeResult {
  /**
   * 1 when the guided agent reached the goal.
   */
  uint8_t success;
  enum QsrnavFailure failure;
  /**
   * Movement commands issued to the guided agent.
   */
  uint64_t instructions;
  /**
   * Coordinator processing milliseconds per instruction, on the
   * deterministic operation-count clock.
   */
  double proc_ms_per_instruction;
  /**
   * Integrated guided-agent path, cm.
   */
  double path_cm;
  /**
   * Simulated duration, s.
   */
  double sim_time_s;
} QsrnavEpisodeResult;

/**
 * Aggregate outcome of a batch. Means and deviations cover successful
 * episodes only.
 */
typedef struct QsrnavBatchSummary {
  uint64_t episodes;
  uint64_t successes;
  double success_rate_pct;
  double instructions_mean;
  double instructions_std;
  double proc_ms_mean;
  double proc_ms_std;
  double path_cm_mean;
  double path_cm_std;
} QsrnavBatchSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; never freed by the caller.
 */
const char *qsrnav_version(void);

/**
 * Message of the most recent failing call on this thread, or null. The
 * pointer stays valid until the next qsrnav call on the same thread.
 */
const char *qsrnav_last_error(void);

/**
 * Loads a scenario TOML file into a new handle.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be a valid pointer.
 */
enum QsrnavStatus qsrnav_scenario_load(const char *path, struct QsrnavScenario **out);

/**
 * Parses a scenario from TOML text into a new handle.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be a valid pointer.
 */
enum QsrnavStatus qsrnav_scenario_from_toml(const char *text, struct QsrnavScenario **out);

/**
 * Releases a scenario handle. Null is ignored.
 *
 * # Safety
 * `scenario` must be null or a pointer returned by a qsrnav constructor
 * that has not been freed yet.
 */
void qsrnav_scenario_free(struct QsrnavScenario *scenario);

/**
 * Runs one episode on the scenario's configured layout.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum QsrnavStatus qsrnav_run_episode(const struct QsrnavScenario *scenario,
                                     uint64_t seed,
                                     struct QsrnavEpisodeResult *out);

/**
 * Runs a batch of episodes over freshly sampled layouts and writes the
 * aggregate summary.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum QsrnavStatus qsrnav_run_batch(const struct QsrnavScenario *scenario,
                                   uint64_t episodes,
                                   uint64_t base_seed,
                                   struct QsrnavBatchSummary *out);

/**
 * Runs a batch and writes per-episode results and/or the summary as CSV.
 * Either path may be null to skip that file, but not both.
 *
 * # Safety
 * `scenario` must be a live handle; non-null paths must be nul-terminated
 * strings.
 */
enum QsrnavStatus qsrnav_batch_to_csv(const struct QsrnavScenario *scenario,
                                      uint64_t episodes,
                                      uint64_t base_seed,
                                      const char *results_path,
                                      const char *summary_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSRNAV_H */
