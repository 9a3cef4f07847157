//! Translation of sector relations into linear inequality systems.
//!
//! A relation "target lies in sector `c` of `source`" with source heading
//! `theta` bounds the direction from source to target between the rays
//! `c' = c*eta + theta` and `d' = (c+1)*eta + theta`. Both bounds are linear
//! in the entity coordinates:
//!
//! ```text
//! -sin(c') xs + cos(c') ys + sin(c') xt - cos(c') yt <= 0
//!  sin(d') xs - cos(d') ys - sin(d') xt + cos(d') yt <= epsilon
//! ```
//!
//! `epsilon <= 0` keeps the target strictly inside the open side of the
//! second ray; the default of -1 adds a one-centimetre margin. Entities with
//! known positions are substituted into the rows; free entities become
//! variable pairs constrained to the arena box. An optional final variable
//! is the radius of the largest inscribed ball (Chebyshev center), so
//! maximizing it picks a solution away from the constraint boundaries.

use std::collections::{BTreeMap, BTreeSet};

use crate::angle::Angle;
use crate::scenario::Arena;
use crate::sectors::simplex::System;
use crate::sectors::{sector_width, SectorRelation};

/// Tolerance for verifying a solver point against the original rows.
pub const VERIFY_TOL: f64 = 1e-9;

/// Builder: declare entity roles, then assemble systems for relation sets.
#[derive(Debug, Clone)]
pub struct RelationSystem<K: Ord + Clone> {
    m: u32,
    epsilon: f64,
    arena: Arena,
    anchored: BTreeMap<K, (f64, f64)>,
    free: BTreeSet<K>,
}

impl<K: Ord + Clone + std::fmt::Debug> RelationSystem<K> {
    pub fn new(m: u32, epsilon: f64, arena: Arena) -> Self {
        RelationSystem { m, epsilon, arena, anchored: BTreeMap::new(), free: BTreeSet::new() }
    }

    /// Pin an entity to a known position.
    pub fn anchor(&mut self, id: K, position: (f64, f64)) -> &mut Self {
        self.free.remove(&id);
        self.anchored.insert(id, position);
        self
    }

    /// Declare an entity whose position the solver must find.
    pub fn free(&mut self, id: K) -> &mut Self {
        self.anchored.remove(&id);
        self.free.insert(id);
        self
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    /// Assemble the system for `relations`, each paired with its source's
    /// heading. With `chebyshev` a radius variable is appended (only when
    /// free entities exist).
    pub fn build(&self, relations: &[(SectorRelation<K>, Angle)], chebyshev: bool) -> LpBuild<K> {
        let free_columns: BTreeMap<K, usize> =
            self.free.iter().enumerate().map(|(i, id)| (id.clone(), 2 * i)).collect();
        let n_free = 2 * free_columns.len();
        let radius_col = if chebyshev && n_free > 0 { Some(n_free) } else { None };
        let num_vars = n_free + radius_col.is_some() as usize;
        let mut system = System::new(num_vars);

        let eta = sector_width(self.m);
        for (rel, heading) in relations {
            debug_assert!(rel.sector < self.m);
            let c = rel.sector as f64 * eta + heading.radians();
            let d = (rel.sector + 1) as f64 * eta + heading.radians();
            self.push_ray_row(&mut system, &free_columns, radius_col, rel, c, -1.0, 0.0);
            self.push_ray_row(&mut system, &free_columns, radius_col, rel, d, 1.0, self.epsilon);
        }

        for (id, &base) in &free_columns {
            debug_assert!(self.anchored.get(id).is_none());
            for (col, limit) in
                [(base, self.arena.width_cm), (base + 1, self.arena.height_cm)]
            {
                let mut lo = vec![0.0; num_vars];
                lo[col] = -1.0;
                let mut hi = vec![0.0; num_vars];
                hi[col] = 1.0;
                if let Some(r) = radius_col {
                    lo[r] = 1.0;
                    hi[r] = 1.0;
                }
                system.push(lo, 0.0);
                system.push(hi, limit);
            }
        }
        if let Some(r) = radius_col {
            let mut row = vec![0.0; num_vars];
            row[r] = -1.0;
            system.push(row, 0.0);
        }

        LpBuild {
            system,
            free_columns,
            anchored: self.anchored.clone(),
            radius_col,
        }
    }

    /// One half-plane row: `sign * (sin(a) (xs - xt) - cos(a) (ys - yt)) <= rhs`
    /// with known positions folded into the right-hand side.
    fn push_ray_row(
        &self,
        system: &mut System,
        free_columns: &BTreeMap<K, usize>,
        radius_col: Option<usize>,
        rel: &SectorRelation<K>,
        ray: f64,
        sign: f64,
        rhs: f64,
    ) {
        let (sin, cos) = ray.sin_cos();
        let mut coeffs = vec![0.0; system.num_vars];
        let mut rhs = rhs;
        let mut apply = |id: &K, cx: f64, cy: f64| match free_columns.get(id) {
            Some(&base) => {
                coeffs[base] += cx;
                coeffs[base + 1] += cy;
            }
            None => {
                let p = self
                    .anchored
                    .get(id)
                    .unwrap_or_else(|| panic!("entity {id:?} neither anchored nor free"));
                rhs -= cx * p.0 + cy * p.1;
            }
        };
        apply(&rel.source, sign * sin, -sign * cos);
        apply(&rel.target, -sign * sin, sign * cos);
        if let Some(r) = radius_col {
            coeffs[r] = coeffs[..r].iter().map(|c| c * c).sum::<f64>().sqrt();
        }
        system.push(coeffs, rhs);
    }
}

/// An assembled system plus the bookkeeping to read entity positions back
/// out of a solution vector.
#[derive(Debug, Clone)]
pub struct LpBuild<K: Ord> {
    pub system: System,
    pub free_columns: BTreeMap<K, usize>,
    pub anchored: BTreeMap<K, (f64, f64)>,
    pub radius_col: Option<usize>,
}

impl<K: Ord> LpBuild<K> {
    pub fn position(&self, x: &[f64], id: &K) -> Option<(f64, f64)> {
        if let Some(&base) = self.free_columns.get(id) {
            return Some((x[base], x[base + 1]));
        }
        self.anchored.get(id).copied()
    }

    pub fn radius(&self, x: &[f64]) -> Option<f64> {
        self.radius_col.map(|r| x[r])
    }

    /// Check a solver point against every original row.
    pub fn verify(&self, x: &[f64]) -> bool {
        self.system.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
            lhs <= row.rhs + VERIFY_TOL
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::EntityId;
    use crate::sectors::simplex::Feasibility;

    const SQ2: f64 = std::f64::consts::SQRT_2;

    fn arena() -> Arena {
        Arena { width_cm: 100.0, height_cm: 100.0 }
    }

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d).unwrap()
    }

    #[test]
    fn rows_for_sector_one_of_a_facing_east() {
        // m = 8, source heading 0: sector 1 spans 45..90 degrees.
        let mut rs = RelationSystem::new(8, -1.0, arena());
        rs.free(EntityId::Coordinator).free(EntityId::Guided);
        let rel = SectorRelation::new(EntityId::Coordinator, 1, EntityId::Guided);
        let build = rs.build(&[(rel, deg(0.0))], false);

        // Columns: coordinator (0, 1), guided (2, 3).
        let r1 = &build.system.rows[0];
        let expect1 = [-SQ2 / 2.0, SQ2 / 2.0, SQ2 / 2.0, -SQ2 / 2.0];
        for (got, want) in r1.coeffs.iter().zip(expect1) {
            assert!((got - want).abs() < 1e-12, "{:?}", r1.coeffs);
        }
        assert_eq!(r1.rhs, 0.0);

        let r2 = &build.system.rows[1];
        let expect2 = [1.0, 0.0, -1.0, 0.0];
        for (got, want) in r2.coeffs.iter().zip(expect2) {
            assert!((got - want).abs() < 1e-12, "{:?}", r2.coeffs);
        }
        assert_eq!(r2.rhs, -1.0);
    }

    #[test]
    fn anchoring_folds_positions_into_rhs() {
        let mut rs = RelationSystem::new(8, -1.0, arena());
        rs.anchor(EntityId::Coordinator, (10.0, 20.0)).free(EntityId::Guided);
        let rel = SectorRelation::new(EntityId::Coordinator, 1, EntityId::Guided);
        let build = rs.build(&[(rel, deg(0.0))], false);

        let r1 = &build.system.rows[0];
        assert_eq!(r1.coeffs.len(), 2);
        assert!((r1.coeffs[0] - SQ2 / 2.0).abs() < 1e-12);
        assert!((r1.coeffs[1] + SQ2 / 2.0).abs() < 1e-12);
        // rhs = 0 - (-sin45 * 10 + cos45 * 20) = -10 * sq2/2.
        assert!((r1.rhs + 10.0 * SQ2 / 2.0).abs() < 1e-12);

        let r2 = &build.system.rows[1];
        // rhs = -1 - (1 * 10 + 0 * 20) = -11.
        assert!((r2.rhs + 11.0).abs() < 1e-12);
    }

    #[test]
    fn feasible_point_lands_in_the_sector() {
        let mut rs = RelationSystem::new(8, -1.0, arena());
        rs.anchor(EntityId::Coordinator, (50.0, 50.0)).free(EntityId::Guided);
        let rel = SectorRelation::new(EntityId::Coordinator, 3, EntityId::Guided);
        let build = rs.build(&[(rel, deg(30.0))], true);
        let out = build.system.maximize(&[0.0, 0.0, 1.0]).unwrap();
        let Feasibility::Feasible { x, .. } = &out.feasibility else {
            panic!("expected feasible");
        };
        assert!(build.verify(x));
        let guided = build.position(x, &EntityId::Guided).unwrap();
        let s = crate::sectors::sector_of(8, (50.0, 50.0), deg(30.0), guided).unwrap();
        assert_eq!(s, 3);
        assert!(build.radius(x).unwrap() > 0.0);
    }

    #[test]
    fn contradictory_relations_are_infeasible() {
        let mut rs = RelationSystem::new(8, -1.0, arena());
        rs.anchor(EntityId::Coordinator, (50.0, 50.0)).free(EntityId::Guided);
        let r1 = SectorRelation::new(EntityId::Coordinator, 0, EntityId::Guided);
        let r2 = SectorRelation::new(EntityId::Coordinator, 4, EntityId::Guided);
        let build = rs.build(&[(r1, deg(0.0)), (r2, deg(0.0))], false);
        let out = build.system.feasible_point().unwrap();
        assert_eq!(out.feasibility, Feasibility::Infeasible);
    }

    #[test]
    fn fully_anchored_relations_become_constant_checks() {
        let mut rs = RelationSystem::new(8, -1.0, arena());
        rs.anchor(EntityId::Coordinator, (0.0, 0.0)).anchor(EntityId::Guided, (10.0, 10.0));
        let good = SectorRelation::new(EntityId::Coordinator, 1, EntityId::Guided);
        let bad = SectorRelation::new(EntityId::Coordinator, 5, EntityId::Guided);

        let build = rs.build(&[(good, deg(0.0))], false);
        assert_eq!(build.system.num_vars, 0);
        assert!(build.system.feasible_point().unwrap().point().is_some());

        let build = rs.build(&[(bad, deg(0.0))], false);
        assert_eq!(
            build.system.feasible_point().unwrap().feasibility,
            Feasibility::Infeasible
        );
    }

    #[test]
    fn box_rows_keep_free_entities_inside_the_arena() {
        let mut rs = RelationSystem::new(8, -1.0, arena());
        rs.free(EntityId::Guided);
        let build = rs.build(&[], true);
        let out = build.system.maximize(&[0.0, 0.0, 1.0]).unwrap();
        let x = out.point().unwrap();
        let p = build.position(x, &EntityId::Guided).unwrap();
        assert!((p.0 - 50.0).abs() < 1e-9 && (p.1 - 50.0).abs() < 1e-9, "{p:?}");
        assert!((build.radius(x).unwrap() - 50.0).abs() < 1e-9);
    }
}
