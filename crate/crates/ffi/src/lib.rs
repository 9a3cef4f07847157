//! C ABI for the qsrnav guided-navigation library.
//!
//! Conventions: every function returns a [`QsrnavStatus`] and writes results
//! through out-pointers. On any non-`Ok` status the calling thread's error
//! message is updated and can be read with [`qsrnav_last_error`]. Scenario
//! handles are opaque; release them with [`qsrnav_scenario_free`]. Every
//! entry point catches panics, so no unwind ever crosses the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qsrnav::harness::batch::run_batch;
use qsrnav::harness::{run_episode, EpisodeError, EpisodeOptions, EpisodeResult, FailureReason};
use qsrnav::output::{write_results_csv, write_summary_csv, OutputError};
use qsrnav::scenario::{ConfigError, ScenarioConfig};

/// Result of every C entry point. Anything but `Ok` leaves a message in the
/// thread-local error slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsrnavStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario failed to parse or validate.
    Config = 3,
    /// An episode or batch failed to run.
    Episode = 4,
    /// A file could not be read or written.
    Io = 5,
    /// A panic was caught at the boundary.
    Panic = 6,
}

/// Why an episode ended unsuccessfully.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsrnavFailure {
    None = 0,
    /// Simulated time exceeded the configured budget.
    Timeout = 1,
    /// No consistent world model within the retry budget.
    ModelFail = 2,
    /// Particle weights collapsed and the reinitialization budget ran out.
    Degenerate = 3,
}

/// Outcome of a single episode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsrnavEpisodeResult {
    /// 1 when the guided agent reached the goal.
    pub success: u8,
    pub failure: QsrnavFailure,
    /// Movement commands issued to the guided agent.
    pub instructions: u64,
    /// Coordinator processing milliseconds per instruction, on the
    /// deterministic operation-count clock.
    pub proc_ms_per_instruction: f64,
    /// Integrated guided-agent path, cm.
    pub path_cm: f64,
    /// Simulated duration, s.
    pub sim_time_s: f64,
}

/// Aggregate outcome of a batch. Means and deviations cover successful
/// episodes only.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsrnavBatchSummary {
    pub episodes: u64,
    pub successes: u64,
    pub success_rate_pct: f64,
    pub instructions_mean: f64,
    pub instructions_std: f64,
    pub proc_ms_mean: f64,
    pub proc_ms_std: f64,
    pub path_cm_mean: f64,
    pub path_cm_std: f64,
}

/// Opaque scenario handle.
pub struct QsrnavScenario(ScenarioConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error text").expect("static nul-free text"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: QsrnavStatus, message: String) -> QsrnavStatus {
    set_error(message);
    status
}

fn config_status(err: &ConfigError) -> QsrnavStatus {
    match err {
        ConfigError::Io(_) => QsrnavStatus::Io,
        _ => QsrnavStatus::Config,
    }
}

fn episode_status(err: &EpisodeError) -> QsrnavStatus {
    match err {
        EpisodeError::Config(inner) => config_status(inner),
        _ => QsrnavStatus::Episode,
    }
}

fn output_status(_: &OutputError) -> QsrnavStatus {
    QsrnavStatus::Io
}

/// Runs a closure with panics converted to `Panic` status.
fn guarded(body: impl FnOnce() -> QsrnavStatus) -> QsrnavStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".into());
            fail(QsrnavStatus::Panic, format!("caught panic: {text}"))
        }
    }
}

/// Reads a required C string argument.
///
/// # Safety
/// `raw` must be null or point to a nul-terminated string.
unsafe fn required_str<'a>(raw: *const c_char, name: &str) -> Result<&'a str, QsrnavStatus> {
    if raw.is_null() {
        return Err(fail(QsrnavStatus::NullArg, format!("{name} must not be null")));
    }
    CStr::from_ptr(raw).to_str().map_err(|_| {
        fail(QsrnavStatus::InvalidUtf8, format!("{name} is not valid UTF-8"))
    })
}

unsafe fn required_scenario<'a>(
    raw: *const QsrnavScenario,
) -> Result<&'a ScenarioConfig, QsrnavStatus> {
    if raw.is_null() {
        return Err(fail(QsrnavStatus::NullArg, "scenario must not be null".into()));
    }
    Ok(&(*raw).0)
}

fn convert_result(result: &EpisodeResult) -> QsrnavEpisodeResult {
    QsrnavEpisodeResult {
        success: result.success as u8,
        failure: match result.failure {
            None => QsrnavFailure::None,
            Some(FailureReason::Timeout) => QsrnavFailure::Timeout,
            Some(FailureReason::ModelFail) => QsrnavFailure::ModelFail,
            Some(FailureReason::Degenerate) => QsrnavFailure::Degenerate,
        },
        instructions: result.instructions,
        proc_ms_per_instruction: result.proc_ms_per_instruction,
        path_cm: result.path_cm,
        sim_time_s: result.sim_time_s,
    }
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn qsrnav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failing call on this thread, or null. The
/// pointer stays valid until the next qsrnav call on the same thread.
#[no_mangle]
pub extern "C" fn qsrnav_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map_or(ptr::null(), |text| text.as_ptr())
    })
}

/// Loads a scenario TOML file into a new handle.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsrnav_scenario_load(
    path: *const c_char,
    out: *mut *mut QsrnavScenario,
) -> QsrnavStatus {
    guarded(|| {
        if out.is_null() {
            return fail(QsrnavStatus::NullArg, "out must not be null".into());
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ScenarioConfig::load(path) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(QsrnavScenario(cfg)));
                QsrnavStatus::Ok
            }
            Err(err) => fail(config_status(&err), err.to_string()),
        }
    })
}

/// Parses a scenario from TOML text into a new handle.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsrnav_scenario_from_toml(
    text: *const c_char,
    out: *mut *mut QsrnavScenario,
) -> QsrnavStatus {
    guarded(|| {
        if out.is_null() {
            return fail(QsrnavStatus::NullArg, "out must not be null".into());
        }
        let text = match required_str(text, "text") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match ScenarioConfig::from_toml_str(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(QsrnavScenario(cfg)));
                QsrnavStatus::Ok
            }
            Err(err) => fail(config_status(&err), err.to_string()),
        }
    })
}

/// Releases a scenario handle. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a pointer returned by a qsrnav constructor
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn qsrnav_scenario_free(scenario: *mut QsrnavScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs one episode on the scenario's configured layout.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsrnav_run_episode(
    scenario: *const QsrnavScenario,
    seed: u64,
    out: *mut QsrnavEpisodeResult,
) -> QsrnavStatus {
    guarded(|| {
        if out.is_null() {
            return fail(QsrnavStatus::NullArg, "out must not be null".into());
        }
        let cfg = match required_scenario(scenario) {
            Ok(cfg) => cfg,
            Err(status) => return status,
        };
        match run_episode(cfg, seed, EpisodeOptions::default()) {
            Ok(result) => {
                *out = convert_result(&result);
                QsrnavStatus::Ok
            }
            Err(err) => fail(episode_status(&err), err.to_string()),
        }
    })
}

/// Runs a batch of episodes over freshly sampled layouts and writes the
/// aggregate summary.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qsrnav_run_batch(
    scenario: *const QsrnavScenario,
    episodes: u64,
    base_seed: u64,
    out: *mut QsrnavBatchSummary,
) -> QsrnavStatus {
    guarded(|| {
        if out.is_null() {
            return fail(QsrnavStatus::NullArg, "out must not be null".into());
        }
        let cfg = match required_scenario(scenario) {
            Ok(cfg) => cfg,
            Err(status) => return status,
        };
        match run_batch(cfg, episodes as usize, base_seed) {
            Ok(batch) => {
                let s = &batch.summary;
                *out = QsrnavBatchSummary {
                    episodes: s.episodes as u64,
                    successes: s.successes as u64,
                    success_rate_pct: s.success_rate_pct,
                    instructions_mean: s.instructions.mean,
                    instructions_std: s.instructions.std,
                    proc_ms_mean: s.proc_ms.mean,
                    proc_ms_std: s.proc_ms.std,
                    path_cm_mean: s.path_cm.mean,
                    path_cm_std: s.path_cm.std,
                };
                QsrnavStatus::Ok
            }
            Err(err) => fail(episode_status(&err), err.to_string()),
        }
    })
}

/// Runs a batch and writes per-episode results and/or the summary as CSV.
/// Either path may be null to skip that file, but not both.
///
/// # Safety
/// `scenario` must be a live handle; non-null paths must be nul-terminated
/// strings.
#[no_mangle]
pub unsafe extern "C" fn qsrnav_batch_to_csv(
    scenario: *const QsrnavScenario,
    episodes: u64,
    base_seed: u64,
    results_path: *const c_char,
    summary_path: *const c_char,
) -> QsrnavStatus {
    guarded(|| {
        let cfg = match required_scenario(scenario) {
            Ok(cfg) => cfg,
            Err(status) => return status,
        };
        if results_path.is_null() && summary_path.is_null() {
            return fail(
                QsrnavStatus::NullArg,
                "at least one of results_path and summary_path is required".into(),
            );
        }
        let results_path = if results_path.is_null() {
            None
        } else {
            match required_str(results_path, "results_path") {
                Ok(p) => Some(p),
                Err(status) => return status,
            }
        };
        let summary_path = if summary_path.is_null() {
            None
        } else {
            match required_str(summary_path, "summary_path") {
                Ok(p) => Some(p),
                Err(status) => return status,
            }
        };
        let batch = match run_batch(cfg, episodes as usize, base_seed) {
            Ok(batch) => batch,
            Err(err) => return fail(episode_status(&err), err.to_string()),
        };
        if let Some(path) = results_path {
            if let Err(err) = write_results_csv(std::path::Path::new(path), &batch.results) {
                return fail(output_status(&err), err.to_string());
            }
        }
        if let Some(path) = summary_path {
            if let Err(err) = write_summary_csv(std::path::Path::new(path), &[batch.summary]) {
                return fail(output_status(&err), err.to_string());
            }
        }
        QsrnavStatus::Ok
    })
}
