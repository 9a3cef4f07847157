//! Egocentric sector calculus.
//!
//! An observer with heading `theta` divides the plane into `m` half-open
//! sectors of width `eta = 2*pi/m`, counted counterclockwise from the
//! heading. Sector `s` spans `[s*eta, (s+1)*eta)` relative to the heading,
//! and the boundary ray `s*eta` belongs to sector `s`.
//!
//! Submodules build linear constraint systems from sector observations
//! ([`lp`]), solve them with a dense two-phase simplex ([`simplex`]), and
//! search for a world model consistent with a full observation set
//! ([`search`]).

pub mod lp;
pub mod search;
pub mod simplex;

use thiserror::Error;

use crate::angle::{normalize_radians, Angle};
use crate::command::Command;
use crate::scenario::CommandMapKind;

pub use lp::{LpBuild, RelationSystem};
pub use search::{search_valid_model, ModelSearch, SearchError, SearchStats, WorldModel};
pub use simplex::{Feasibility, LpOutcome, LpStats, Row, SimplexError, System};

/// Positions closer than this are treated as coincident: no direction exists.
pub const COINCIDENT_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("entities are coincident; direction is undefined")]
    Coincident,
}

/// Sector width for granularity `m`.
pub fn sector_width(m: u32) -> f64 {
    std::f64::consts::TAU / m as f64
}

/// Sector of the direction `bearing` as seen by an observer with heading
/// `heading`, for granularity `m`.
pub fn sector_of_bearing(m: u32, heading: Angle, bearing: Angle) -> u32 {
    let eta = sector_width(m);
    let rel = normalize_radians(bearing.radians() - heading.radians());
    // rel / eta can land exactly on m for rel just below 2*pi.
    (rel / eta).floor().min((m - 1) as f64) as u32
}

/// Sector in which an observer at `observer` with heading `heading` sees the
/// point `target`.
pub fn sector_of(
    m: u32,
    observer: (f64, f64),
    heading: Angle,
    target: (f64, f64),
) -> Result<u32, GeometryError> {
    let dx = target.0 - observer.0;
    let dy = target.1 - observer.1;
    if dx.hypot(dy) < COINCIDENT_EPS {
        return Err(GeometryError::Coincident);
    }
    let bearing = Angle::from_radians(dy.atan2(dx)).expect("atan2 is finite");
    Ok(sector_of_bearing(m, heading, bearing))
}

/// One qualitative statement: from `source` (with some heading), `target`
/// lies in sector `sector`. Generic over the entity key so the same calculus
/// serves both the navigation harness and ad-hoc named instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorRelation<K> {
    pub source: K,
    pub sector: u32,
    pub target: K,
}

impl<K> SectorRelation<K> {
    pub fn new(source: K, sector: u32, target: K) -> Self {
        SectorRelation { source, sector, target }
    }
}

/// True when `target` seen from `source` with `heading` falls in
/// `relation.sector`.
pub fn relation_holds<K>(
    m: u32,
    relation: &SectorRelation<K>,
    source: (f64, f64),
    heading: Angle,
    target: (f64, f64),
) -> Result<bool, GeometryError> {
    Ok(sector_of(m, source, heading, target)? == relation.sector)
}

/// Quarter-plane boundaries of the command ranges, as multiples of `m/8`.
/// `m` must be divisible by 8 so the boundaries are integers.
fn command_ranges(m: u32, kind: CommandMapKind) -> [(u32, u32, Command); 4] {
    debug_assert!(m % 8 == 0);
    let k = m / 8;
    match kind {
        // Forward range centred on sector 0 (dead ahead), then CCW:
        // left, behind, right.
        CommandMapKind::Calibrated => [
            (k, 3 * k, Command::TurnLeft),
            (3 * k, 5 * k, Command::MoveBackward),
            (5 * k, 7 * k, Command::TurnRight),
            (7 * k, 8 * k, Command::MoveForward), // wraps through 0
        ],
        // Historical label assignment: same four arcs, rotated labels.
        CommandMapKind::Literal => [
            (k, 3 * k, Command::TurnLeft),
            (3 * k, 5 * k, Command::TurnRight),
            (5 * k, 7 * k, Command::MoveForward),
            (7 * k, 8 * k, Command::MoveBackward),
        ],
    }
}

/// Command that drives the guided agent towards a goal seen in `sector` of
/// the guided agent's own frame.
pub fn command_for_sector(m: u32, sector: u32, kind: CommandMapKind) -> Command {
    debug_assert!(sector < m);
    let k = m / 8;
    for &(lo, hi, cmd) in &command_ranges(m, kind) {
        if sector >= lo && sector < hi {
            return cmd;
        }
    }
    // Remaining arc [0, k): the wrap-around of the fourth range.
    debug_assert!(sector < k);
    match kind {
        CommandMapKind::Calibrated => Command::MoveForward,
        CommandMapKind::Literal => Command::MoveBackward,
    }
}
