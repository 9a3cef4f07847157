//! Model search: find entity poses consistent with a set of sector relations.
//!
//! Unknown orientations are completed by lexicographic enumeration over the
//! discrete heading set `Theta_m = {0, eta, ..., (m-1) eta}` (listed entities
//! most significant first, values ascending); each completion is tested with
//! one linear program and the first feasible one wins. This first-found rule
//! makes the search deterministic. `Fail` is returned only when every
//! completion is infeasible.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::angle::Angle;
use crate::entity::Pose;
use crate::scenario::Arena;
use crate::sectors::lp::RelationSystem;
use crate::sectors::simplex::Feasibility;
use crate::sectors::{relation_holds, sector_width, GeometryError, SectorRelation};

/// Defensive bound on the number of orientation completions.
const MAX_ASSIGNMENTS: u128 = 1_000_000;

/// A concrete arrangement: positions for every entity, headings for every
/// entity that has one.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel<K: Ord> {
    pub m: u32,
    pub positions: BTreeMap<K, (f64, f64)>,
    pub headings: BTreeMap<K, Angle>,
    /// Radius of the largest ball around the returned positions that still
    /// satisfies every constraint; `None` when only feasibility was solved.
    pub chebyshev_radius: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelCheckError {
    #[error("entity missing from model")]
    MissingEntity,
    #[error("relation source has no heading in the model")]
    MissingHeading,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl<K: Ord> WorldModel<K> {
    pub fn pose(&self, id: &K) -> Option<Pose> {
        let &(x, y) = self.positions.get(id)?;
        let theta = self.headings.get(id).copied().unwrap_or_default();
        Some(Pose::new(x, y, theta))
    }

    /// Re-evaluate one relation against the model geometry.
    pub fn check_relation(&self, rel: &SectorRelation<K>) -> Result<bool, ModelCheckError> {
        let source =
            *self.positions.get(&rel.source).ok_or(ModelCheckError::MissingEntity)?;
        let target =
            *self.positions.get(&rel.target).ok_or(ModelCheckError::MissingEntity)?;
        let heading =
            *self.headings.get(&rel.source).ok_or(ModelCheckError::MissingHeading)?;
        Ok(relation_holds(self.m, rel, source, heading, target)?)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no orientation assignment admits a consistent arrangement")]
    NoValidModel,
    #[error("relation source {0} has no known or enumerated orientation")]
    MissingOrientation(String),
    #[error("numerical failure in model search: {0}")]
    Numerical(String),
    #[error("orientation search space too large: {0} assignments")]
    SearchSpaceTooLarge(u128),
}

/// Work counters accumulated over one search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Orientation completions tried.
    pub assignments: u64,
    /// Linear programs solved.
    pub lp_solves: u64,
    /// Simplex pivots across all programs.
    pub pivots: u64,
    /// Abstract operations across all programs (see [`super::LpStats::ops`]).
    pub ops: u64,
}

impl SearchStats {
    pub fn absorb(&mut self, other: SearchStats) {
        self.assignments += other.assignments;
        self.lp_solves += other.lp_solves;
        self.pivots += other.pivots;
        self.ops += other.ops;
    }
}

/// One model-search problem.
#[derive(Debug, Clone)]
pub struct ModelSearch<'a, K: Ord + Clone + std::fmt::Debug> {
    pub m: u32,
    pub arena: Arena,
    pub epsilon: f64,
    pub relations: &'a [SectorRelation<K>],
    /// Headings fixed up front (never enumerated).
    pub known_headings: BTreeMap<K, Angle>,
    /// Entities whose heading is enumerated, most significant first.
    pub unknown_headings: Vec<K>,
    /// Entities with known positions; everything else mentioned in the
    /// relations is solved for.
    pub anchored: BTreeMap<K, (f64, f64)>,
    /// Solve for the Chebyshev center instead of an arbitrary feasible point.
    pub chebyshev: bool,
}

impl<K: Ord + Clone + std::fmt::Debug> ModelSearch<'_, K> {
    /// Entities mentioned by any relation.
    fn entities(&self) -> BTreeSet<K> {
        self.relations
            .iter()
            .flat_map(|r| [r.source.clone(), r.target.clone()])
            .collect()
    }

    pub fn run(&self) -> (Result<WorldModel<K>, SearchError>, SearchStats) {
        let mut stats = SearchStats::default();
        let result = self.run_inner(&mut stats);
        (result, stats)
    }

    fn run_inner(&self, stats: &mut SearchStats) -> Result<WorldModel<K>, SearchError> {
        for rel in self.relations {
            let known = self.known_headings.contains_key(&rel.source)
                || self.unknown_headings.contains(&rel.source);
            if !known {
                return Err(SearchError::MissingOrientation(format!("{:?}", rel.source)));
            }
        }
        let total = (self.m as u128)
            .checked_pow(self.unknown_headings.len() as u32)
            .unwrap_or(u128::MAX);
        if total > MAX_ASSIGNMENTS {
            return Err(SearchError::SearchSpaceTooLarge(total));
        }

        let mut template = RelationSystem::new(self.m, self.epsilon, self.arena);
        for id in self.entities() {
            match self.anchored.get(&id) {
                Some(&p) => template.anchor(id, p),
                None => template.free(id),
            };
        }
        let eta = sector_width(self.m);
        let want_center = self.chebyshev && template.free_count() > 0;

        let mut digits = vec![0u32; self.unknown_headings.len()];
        loop {
            stats.assignments += 1;
            let mut headings = self.known_headings.clone();
            for (id, &d) in self.unknown_headings.iter().zip(&digits) {
                headings.insert(
                    id.clone(),
                    Angle::from_radians(d as f64 * eta).expect("finite heading"),
                );
            }
            let resolved: Vec<(SectorRelation<K>, Angle)> = self
                .relations
                .iter()
                .map(|r| (r.clone(), headings[&r.source]))
                .collect();
            let build = template.build(&resolved, self.chebyshev);
            let outcome = if want_center {
                let mut obj = vec![0.0; build.system.num_vars];
                obj[build.radius_col.expect("radius present")] = 1.0;
                build.system.maximize(&obj)
            } else {
                build.system.feasible_point()
            };
            let outcome = outcome.map_err(|e| SearchError::Numerical(e.to_string()))?;
            stats.lp_solves += 1;
            stats.pivots += outcome.stats.pivots;
            stats.ops += outcome.stats.ops();
            if let Feasibility::Feasible { x, .. } = &outcome.feasibility {
                if !build.verify(x) {
                    return Err(SearchError::Numerical(
                        "feasible point failed row verification".into(),
                    ));
                }
                let positions = self
                    .entities()
                    .into_iter()
                    .map(|id| {
                        let p = build.position(x, &id).expect("declared entity");
                        (id, p)
                    })
                    .collect();
                return Ok(WorldModel {
                    m: self.m,
                    positions,
                    headings,
                    chebyshev_radius: build.radius(x),
                });
            }
            if !increment(&mut digits, self.m) {
                return Err(SearchError::NoValidModel);
            }
        }
    }
}

/// Advance the odometer (last digit fastest); false when it wraps.
fn increment(digits: &mut [u32], m: u32) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < m {
            return true;
        }
        *d = 0;
    }
    false
}

/// Single-call search. Unknown orientations are the relation sources without
/// a known heading, enumerated in key order.
pub fn search_valid_model<K: Ord + Clone + std::fmt::Debug>(
    m: u32,
    arena: Arena,
    epsilon: f64,
    relations: &[SectorRelation<K>],
    known_headings: BTreeMap<K, Angle>,
    anchored: BTreeMap<K, (f64, f64)>,
    chebyshev: bool,
) -> (Result<WorldModel<K>, SearchError>, SearchStats) {
    let unknown: Vec<K> = relations
        .iter()
        .map(|r| r.source.clone())
        .filter(|s| !known_headings.contains_key(s))
        .collect::<BTreeSet<K>>()
        .into_iter()
        .collect();
    ModelSearch {
        m,
        arena,
        epsilon,
        relations,
        known_headings,
        unknown_headings: unknown,
        anchored,
        chebyshev,
    }
    .run()
}
