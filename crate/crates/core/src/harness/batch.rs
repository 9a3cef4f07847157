//! Batch experiment runner: many episodes of one scenario with freshly
//! sampled initial layouts, run in parallel, aggregated into the summary
//! statistics used by the experiment tables.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::angle::Angle;
use crate::entity::{EntityId, Pose};
use crate::harness::{run_episode, EpisodeError, EpisodeOptions, EpisodeResult};
use crate::qpf::region_of;
use crate::rng::{seeded_rng, streams};
use crate::scenario::{ArrivalMode, ScenarioConfig};
use crate::sectors::sector_width;

/// Margin kept from every arena edge when sampling initial positions, cm.
pub const EDGE_INSET_CM: f64 = 250.0;

/// Minimum pairwise separation of sampled entities, cm.
pub const MIN_SEPARATION_CM: f64 = 10.0;

/// Give up on a layout after this many rejected draws.
const MAX_LAYOUT_ATTEMPTS: u32 = 10_000;

/// Mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

/// Aggregate view of one batch. Metric statistics cover successful episodes
/// only; failures count solely against the success rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub method: &'static str,
    pub m: u32,
    pub tau_s: Option<f64>,
    pub orientation_known: bool,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate_pct: f64,
    pub instructions: MeanStd,
    pub proc_ms: MeanStd,
    pub path_cm: MeanStd,
}

impl BatchSummary {
    pub fn from_results(cfg: &ScenarioConfig, results: &[EpisodeResult]) -> BatchSummary {
        let ok: Vec<&EpisodeResult> = results.iter().filter(|r| r.success).collect();
        let collect = |f: fn(&EpisodeResult) -> f64| -> Vec<f64> {
            ok.iter().map(|r| f(r)).collect()
        };
        BatchSummary {
            method: cfg.method.label(),
            m: cfg.m,
            tau_s: cfg.tau_s,
            orientation_known: cfg.orientation_known,
            episodes: results.len(),
            successes: ok.len(),
            success_rate_pct: if results.is_empty() {
                0.0
            } else {
                100.0 * ok.len() as f64 / results.len() as f64
            },
            instructions: MeanStd::of(&collect(|r| r.instructions as f64)),
            proc_ms: MeanStd::of(&collect(|r| r.proc_ms_per_instruction)),
            path_cm: MeanStd::of(&collect(|r| r.path_cm)),
        }
    }
}

/// Everything a batch produces: per-episode rows plus the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub results: Vec<EpisodeResult>,
    pub summary: BatchSummary,
}

/// Sample one initial layout: every entity uniform in the inset arena,
/// headings uniform over the discretized orientations (the goal is a
/// location, its heading is irrelevant and set to zero). Layouts that put
/// two entities within the separation floor, any pair of them coincident in
/// perception terms, or the guided agent already at the goal are rejected
/// and redrawn whole.
pub fn sample_layout(
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<EntityId, Pose>, EpisodeError> {
    let w = cfg.arena.width_cm;
    let h = cfg.arena.height_cm;
    if w <= 2.0 * EDGE_INSET_CM || h <= 2.0 * EDGE_INSET_CM {
        return Err(EpisodeError::Setup(format!(
            "arena {w} x {h} cm leaves no room inside the {EDGE_INSET_CM} cm edge inset"
        )));
    }
    let eta = sector_width(cfg.m);
    let ids = cfg.entity_ids();

    'attempt: for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let mut poses = BTreeMap::new();
        for &id in &ids {
            let x = rng.random_range(EDGE_INSET_CM..=w - EDGE_INSET_CM);
            let y = rng.random_range(EDGE_INSET_CM..=h - EDGE_INSET_CM);
            let theta = if id == EntityId::Goal {
                Angle::ZERO
            } else {
                let k = rng.random_range(0..cfg.m);
                Angle::from_radians(k as f64 * eta).expect("finite heading")
            };
            poses.insert(id, Pose::new(x, y, theta));
        }

        let flat: Vec<(EntityId, Pose)> = poses.iter().map(|(&i, &p)| (i, p)).collect();
        for (a, (_, pa)) in flat.iter().enumerate() {
            for (_, pb) in flat.iter().skip(a + 1) {
                if pa.distance_to(pb.position()) < MIN_SEPARATION_CM {
                    continue 'attempt;
                }
            }
        }

        // An episode that starts at the goal would be a free success; the
        // protocol wants actual navigation.
        let observers: BTreeMap<EntityId, Pose> = poses
            .iter()
            .filter(|(id, _)| id.is_observer())
            .map(|(&i, &p)| (i, p))
            .collect();
        let guided = poses[&EntityId::Guided].position();
        let goal = poses[&EntityId::Goal].position();
        let started_there = match cfg.arrival {
            ArrivalMode::Radius => {
                (guided.0 - goal.0).hypot(guided.1 - goal.1) <= cfg.goal_radius_cm
            }
            ArrivalMode::Region => match (
                region_of(guided, &observers, cfg.m),
                region_of(goal, &observers, cfg.m),
            ) {
                (Ok(a), Ok(b)) => a == b,
                _ => true,
            },
        };
        if started_there {
            continue 'attempt;
        }

        return Ok(poses);
    }
    Err(EpisodeError::Setup(format!(
        "no acceptable layout after {MAX_LAYOUT_ATTEMPTS} draws"
    )))
}

/// Run `episodes` episodes with seeds `base_seed..base_seed+episodes`, each
/// on its own sampled layout, in parallel. Results come back in episode
/// order regardless of scheduling, so the batch is reproducible.
pub fn run_batch(
    cfg: &ScenarioConfig,
    episodes: usize,
    base_seed: u64,
) -> Result<BatchResult, EpisodeError> {
    cfg.validate()?;
    if episodes == 0 {
        return Err(EpisodeError::Setup("a batch needs at least one episode".into()));
    }
    let runs: Vec<Result<EpisodeResult, EpisodeError>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i as u64;
            let mut layout_rng = seeded_rng(seed, streams::LAYOUT);
            let poses = sample_layout(cfg, &mut layout_rng)?;
            run_episode(cfg, seed, EpisodeOptions { poses: Some(poses), ..Default::default() })
        })
        .collect();

    let mut results = Vec::with_capacity(episodes);
    for run in runs {
        results.push(run?);
    }
    let summary = BatchSummary::from_results(cfg, &results);
    Ok(BatchResult { results, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::FailureReason;

    fn scenario() -> ScenarioConfig {
        let text = r#"
m = 8
method = "qpf"
orientation_known = true

[arena]
width_cm = 1000.0
height_cm = 1000.0

[[entities]]
kind = "coordinator"
x = 100.0
y = 100.0
theta_deg = 0.0

[[entities]]
kind = "observer"
x = 900.0
y = 150.0
theta_deg = 135.0

[[entities]]
kind = "observer"
x = 500.0
y = 900.0
theta_deg = 270.0

[[entities]]
kind = "guided"
x = 400.0
y = 500.0
theta_deg = 0.0

[[entities]]
kind = "goal"
x = 700.0
y = 600.0
"#;
        ScenarioConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn layouts_respect_inset_separation_and_start_rule() {
        let cfg = scenario();
        let mut rng = seeded_rng(9, streams::LAYOUT);
        for _ in 0..100 {
            let poses = sample_layout(&cfg, &mut rng).unwrap();
            assert_eq!(poses.len(), 5);
            let flat: Vec<Pose> = poses.values().copied().collect();
            for p in &flat {
                assert!(p.x >= 250.0 && p.x <= 750.0, "x = {}", p.x);
                assert!(p.y >= 250.0 && p.y <= 750.0, "y = {}", p.y);
            }
            for (i, a) in flat.iter().enumerate() {
                for b in flat.iter().skip(i + 1) {
                    assert!(a.distance_to(b.position()) >= MIN_SEPARATION_CM);
                }
            }
            let eta = sector_width(cfg.m);
            for (&id, p) in &poses {
                if id != EntityId::Goal {
                    let k = p.theta.radians() / eta;
                    assert!((k - k.round()).abs() < 1e-9, "heading off the grid: {k}");
                }
            }
        }
    }

    #[test]
    fn tiny_arena_is_rejected() {
        let mut cfg = scenario();
        cfg.arena.width_cm = 400.0;
        // Entities would sit outside the shrunken arena; bypass validation
        // by probing the sampler directly.
        let mut rng = seeded_rng(9, streams::LAYOUT);
        assert!(sample_layout(&cfg, &mut rng).is_err());
    }

    #[test]
    fn batches_are_reproducible() {
        let mut cfg = scenario();
        cfg.noise.bearing_sigma_deg = 0.0;
        cfg.noise.rotation_sigma_deg = 0.0;
        let a = run_batch(&cfg, 4, 77).unwrap();
        let b = run_batch(&cfg, 4, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.results.len(), 4);
    }

    #[test]
    fn summary_counts_successes_only() {
        let cfg = scenario();
        let results = vec![
            EpisodeResult {
                success: true,
                instructions: 4,
                proc_ms_per_instruction: 2.0,
                path_cm: 100.0,
                sim_time_s: 10.0,
                total_ops: 100,
                wall_ms_per_instruction: None,
                failure: None,
            },
            EpisodeResult {
                success: true,
                instructions: 6,
                proc_ms_per_instruction: 4.0,
                path_cm: 300.0,
                sim_time_s: 30.0,
                total_ops: 100,
                wall_ms_per_instruction: None,
                failure: None,
            },
            EpisodeResult {
                success: false,
                instructions: 50,
                proc_ms_per_instruction: 9.0,
                path_cm: 9999.0,
                sim_time_s: 600.0,
                total_ops: 100,
                wall_ms_per_instruction: None,
                failure: Some(FailureReason::Timeout),
            },
        ];
        let s = BatchSummary::from_results(&cfg, &results);
        assert_eq!(s.episodes, 3);
        assert_eq!(s.successes, 2);
        assert!((s.success_rate_pct - 66.666).abs() < 0.01);
        assert!((s.instructions.mean - 5.0).abs() < 1e-12);
        assert!((s.path_cm.mean - 200.0).abs() < 1e-12);
        // Sample std of {100, 300}.
        assert!((s.path_cm.std - (2.0f64 * 100.0 * 100.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn mean_std_handles_small_samples() {
        assert_eq!(MeanStd::of(&[]), MeanStd { mean: 0.0, std: 0.0 });
        assert_eq!(MeanStd::of(&[3.0]), MeanStd { mean: 3.0, std: 0.0 });
    }
}
