//! Deterministic work accounting for the coordinator's inference.
//!
//! Reported processing times must be reproducible byte for byte across
//! machines, so the default clock is an operation count converted to
//! milliseconds at a fixed nominal rate rather than a wall reading. Only
//! coordinator inference is charged: model construction, filter updates and
//! command selection. Simulated motion and the observers' perception work
//! are free by design.

use crate::sectors::SearchStats;

/// Nominal inference throughput: operations per millisecond.
pub const OPS_PER_MS: f64 = 5.0e5;

/// One sector evaluation (atan2 + normalization + binning).
pub const C_SECTOR: u64 = 8;
/// One command-map lookup.
pub const C_MAP: u64 = 4;
/// One transcendental call inside a weight.
pub const C_EXP: u64 = 16;
/// Per-particle cost of one resampling pass.
pub const C_RESAMPLE: u64 = 8;
/// Per-particle cost of drawing the initial population.
pub const C_RELEASE: u64 = 16;
/// Per-ray cost of accumulating the triangulation normal equations.
pub const C_RAY: u64 = 32;
/// Solving the 2x2 normal system.
pub const C_SOLVE2: u64 = 64;
/// One Euclidean distance.
pub const C_DIST: u64 = 8;

/// Accumulator for the operations charged to the coordinator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostMeter {
    pub ops: u64,
}

impl CostMeter {
    pub fn new() -> CostMeter {
        CostMeter::default()
    }

    pub fn add(&mut self, ops: u64) {
        self.ops = self.ops.saturating_add(ops);
    }

    /// Charge a model search by its own tableau-size-aware operation count.
    pub fn add_search(&mut self, stats: &SearchStats) {
        self.add(stats.ops);
    }

    /// Milliseconds on the nominal clock.
    pub fn ms(&self) -> f64 {
        self.ops as f64 / OPS_PER_MS
    }
}
