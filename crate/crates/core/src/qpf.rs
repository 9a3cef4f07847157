//! Qualitative particle filter.
//!
//! The arena is partitioned into cells by the intersection of every
//! observer's sector rays; a cell is identified by its region signature (the
//! tuple of sector indices, one per observer). Mapping solves one linear
//! program over the sector observations; prediction walks particles forward
//! until their signature changes; the update weights particles by the
//! exponential of the distance between their signature and the observed one.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::entity::{EntityId, Pose};
use crate::filter::Particle;
use crate::observation::ObservationSet;
use crate::scenario::{Arena, SignatureMetric};
use crate::sectors::{
    sector_of, GeometryError, ModelSearch, SearchError, SearchStats, WorldModel,
};

/// One cell of the observer-sector arrangement: the sector index assigned by
/// each observer, in ascending observer order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSignature(pub Vec<u32>);

impl RegionSignature {
    pub fn components(&self) -> &[u32] {
        &self.0
    }
}

/// The signature of `point` under the observers' sector frames.
pub fn region_of(
    point: (f64, f64),
    observers: &BTreeMap<EntityId, Pose>,
    m: u32,
) -> Result<RegionSignature, GeometryError> {
    let mut components = Vec::with_capacity(observers.len());
    for pose in observers.values() {
        components.push(sector_of(m, pose.position(), pose.theta, point)?);
    }
    Ok(RegionSignature(components))
}

/// Euclidean distance between signatures. The literal metric subtracts raw
/// sector indices; the circular one wraps each component difference.
pub fn signature_distance(
    a: &RegionSignature,
    b: &RegionSignature,
    metric: SignatureMetric,
    m: u32,
) -> f64 {
    debug_assert_eq!(a.0.len(), b.0.len());
    let sq: f64 = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(&x, &y)| {
            let d = (x as f64 - y as f64).abs();
            let d = match metric {
                SignatureMetric::Literal => d,
                SignatureMetric::Circular => d.min(m as f64 - d),
            };
            d * d
        })
        .sum();
    sq.sqrt()
}

/// Importance weight from a signature distance.
pub fn qpf_weight(distance: f64) -> f64 {
    (-distance).exp()
}

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("observations admit no consistent world model")]
    Inconsistent,
    #[error("model search failed: {0}")]
    Search(SearchError),
}

/// Build a world model from sector observations: observer headings are
/// fixed from the tuples, observer positions are anchored (observers know
/// their own poses), and the guided agent and goal are solved for. The
/// guided heading enters the model only when the set carries one.
pub fn qpf_mapping(
    zc: &ObservationSet,
    observer_poses: &BTreeMap<EntityId, Pose>,
    m: u32,
    arena: Arena,
    epsilon: f64,
) -> (Result<WorldModel<EntityId>, MappingError>, SearchStats) {
    let relations = zc.sector_relations();
    let mut known = zc.observer_headings();
    if let Some(theta) = zc.guided_heading() {
        known.insert(EntityId::Guided, theta);
    }
    let anchored: BTreeMap<EntityId, (f64, f64)> =
        observer_poses.iter().map(|(&id, p)| (id, p.position())).collect();
    let search = ModelSearch {
        m,
        arena,
        epsilon,
        relations: &relations,
        known_headings: known,
        unknown_headings: vec![],
        anchored,
        chebyshev: true,
    };
    let (result, stats) = search.run();
    let result = result.map_err(|e| match e {
        SearchError::NoValidModel => MappingError::Inconsistent,
        other => MappingError::Search(other),
    });
    (result, stats)
}

/// Feasibility-only consistency check of a full observation set against the
/// anchored observers (the first step of the update).
pub fn qpf_consistent(
    zc: &ObservationSet,
    observer_poses: &BTreeMap<EntityId, Pose>,
    m: u32,
    arena: Arena,
    epsilon: f64,
) -> (Result<bool, SearchError>, SearchStats) {
    let relations = zc.sector_relations();
    let known = zc.observer_headings();
    let anchored: BTreeMap<EntityId, (f64, f64)> =
        observer_poses.iter().map(|(&id, p)| (id, p.position())).collect();
    let search = ModelSearch {
        m,
        arena,
        epsilon,
        relations: &relations,
        known_headings: known,
        unknown_headings: vec![],
        anchored,
        chebyshev: false,
    };
    let (result, stats) = search.run();
    let verdict = match result {
        Ok(_) => Ok(true),
        Err(SearchError::NoValidModel) => Ok(false),
        Err(e) => Err(e),
    };
    (verdict, stats)
}

/// Walk a particle along its heading in fixed steps until its region
/// signature changes or the step budget runs out. Returns the number of
/// steps taken (for the work meter).
///
/// `jitter_cm` roughens the start of the walk with an isotropic Gaussian
/// draw. Without it, resampling duplicates follow identical trajectories
/// forever and the population collapses onto a handful of points.
pub fn qpf_predict_translate(
    particle: &mut Particle,
    observers: &BTreeMap<EntityId, Pose>,
    m: u32,
    step_cm: f64,
    max_steps: u32,
    jitter_cm: f64,
    rng: &mut impl rand::Rng,
) -> u32 {
    if jitter_cm > 0.0 {
        let noise = Normal::new(0.0, jitter_cm).expect("valid jitter");
        particle.pose.x += noise.sample(rng);
        particle.pose.y += noise.sample(rng);
    }
    let Ok(home) = region_of(particle.pose.position(), observers, m) else {
        return 0;
    };
    let (dx, dy) = (particle.pose.theta.cos() * step_cm, particle.pose.theta.sin() * step_cm);
    let (x0, y0) = particle.pose.position();
    for k in 1..=max_steps {
        let p = (x0 + k as f64 * dx, y0 + k as f64 * dy);
        match region_of(p, observers, m) {
            Ok(sig) if sig != home => {
                particle.pose.x = p.0;
                particle.pose.y = p.1;
                return k;
            }
            // Coincident with an observer: step across and keep going.
            Ok(_) | Err(_) => {}
        }
    }
    particle.pose.x = x0 + max_steps as f64 * dx;
    particle.pose.y = y0 + max_steps as f64 * dy;
    max_steps
}

/// Weight the guided particles against the observed signature. Particles
/// whose signature is undefined (coincident with an observer) get weight 0.
pub fn qpf_weigh(
    particles: &mut [Particle],
    observed: &RegionSignature,
    observers: &BTreeMap<EntityId, Pose>,
    m: u32,
    metric: SignatureMetric,
) {
    for p in particles {
        p.weight = match region_of(p.pose.position(), observers, m) {
            Ok(sig) => qpf_weight(signature_distance(observed, &sig, metric, m)),
            Err(_) => 0.0,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::Angle;
    use crate::observation::{Measurement, ObservationTuple};
    use crate::rng::seeded_rng;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d).unwrap()
    }

    fn arena() -> Arena {
        Arena { width_cm: 1000.0, height_cm: 1000.0 }
    }

    fn observers() -> BTreeMap<EntityId, Pose> {
        BTreeMap::from([
            (EntityId::Coordinator, Pose::new(0.0, 0.0, deg(0.0))),
            (EntityId::Observer(1), Pose::new(10.0, 0.0, deg(90.0))),
        ])
    }

    #[test]
    fn signature_components_follow_observer_order() {
        let sig = region_of((1.0, 1.0), &observers(), 8).unwrap();
        // Coordinator sees 45 deg -> sector 1; observer 1 sees the point at
        // atan2(1, -9) = 173.7 deg, minus heading 90 -> 83.7 deg -> sector 1.
        assert_eq!(sig.components(), &[1, 1]);
    }

    #[test]
    fn single_observer_signature_matches_sector() {
        let obs = BTreeMap::from([(EntityId::Coordinator, Pose::new(0.0, 0.0, deg(0.0)))]);
        let sig = region_of((1.0, 1.0), &obs, 8).unwrap();
        assert_eq!(sig.components(), &[1]);
    }

    #[test]
    fn literal_distance_examples() {
        let a = RegionSignature(vec![3]);
        let b = RegionSignature(vec![4]);
        let d = signature_distance(&a, &b, SignatureMetric::Literal, 8);
        assert!((qpf_weight(d) - (-1.0f64).exp()).abs() < 1e-12);

        let a = RegionSignature(vec![0, 0]);
        let b = RegionSignature(vec![3, 4]);
        let d = signature_distance(&a, &b, SignatureMetric::Literal, 8);
        assert!((d - 5.0).abs() < 1e-12);
        assert!((qpf_weight(d) - (-5.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn equal_signatures_weigh_one() {
        let a = RegionSignature(vec![2, 7, 4]);
        assert_eq!(signature_distance(&a, &a, SignatureMetric::Literal, 8), 0.0);
        assert_eq!(qpf_weight(0.0), 1.0);
    }

    #[test]
    fn circular_metric_wraps() {
        let a = RegionSignature(vec![7]);
        let b = RegionSignature(vec![0]);
        assert_eq!(signature_distance(&a, &b, SignatureMetric::Literal, 8), 7.0);
        assert_eq!(signature_distance(&a, &b, SignatureMetric::Circular, 8), 1.0);
    }

    #[test]
    fn weight_monotone_in_distance() {
        for (near, far) in [(0.5, 0.6), (1.0, 2.0), (3.0, 3.0001)] {
            assert!(qpf_weight(near) > qpf_weight(far));
        }
    }

    fn full_zc(
        poses: &BTreeMap<EntityId, Pose>,
        guided: (f64, f64),
        goal: (f64, f64),
        m: u32,
    ) -> ObservationSet {
        let mut zc = ObservationSet::new();
        let ids: Vec<EntityId> = poses.keys().copied().collect();
        for &o in &ids {
            let op = poses[&o];
            for &t in &ids {
                if t != o {
                    let s = sector_of(m, op.position(), op.theta, poses[&t].position()).unwrap();
                    zc.insert(ObservationTuple {
                        observer: o,
                        target: t,
                        measurement: Measurement::Sector(s),
                        observer_heading: op.theta,
                    });
                }
            }
            for (t, p) in [(EntityId::Guided, guided), (EntityId::Goal, goal)] {
                let s = sector_of(m, op.position(), op.theta, p).unwrap();
                zc.insert(ObservationTuple {
                    observer: o,
                    target: t,
                    measurement: Measurement::Sector(s),
                    observer_heading: op.theta,
                });
            }
        }
        zc
    }

    #[test]
    fn mapping_round_trips_noiseless_observations() {
        let poses = BTreeMap::from([
            (EntityId::Coordinator, Pose::new(100.0, 100.0, deg(0.0))),
            (EntityId::Observer(1), Pose::new(900.0, 150.0, deg(135.0))),
            (EntityId::Observer(2), Pose::new(500.0, 900.0, deg(270.0))),
        ]);
        let zc = full_zc(&poses, (430.0, 520.0), (700.0, 600.0), 8);
        let (model, stats) = qpf_mapping(&zc, &poses, 8, arena(), -1.0);
        let model = model.unwrap();
        assert_eq!(stats.lp_solves, 1, "headings fixed: exactly one program");
        for r in &zc.sector_relations() {
            assert!(model.check_relation(r).unwrap(), "{r:?}");
        }
        // Observers are anchored at their true poses.
        assert_eq!(model.positions[&EntityId::Coordinator], (100.0, 100.0));
        assert!(model.positions.contains_key(&EntityId::Guided));
        assert!(model.positions.contains_key(&EntityId::Goal));
    }

    #[test]
    fn inconsistent_observations_fail_and_recheck() {
        let poses = BTreeMap::from([
            (EntityId::Coordinator, Pose::new(100.0, 100.0, deg(0.0))),
            (EntityId::Observer(1), Pose::new(900.0, 150.0, deg(135.0))),
        ]);
        let mut zc = full_zc(&poses, (430.0, 520.0), (700.0, 600.0), 8);
        // Coordinator suddenly claims the guided agent is behind it, which
        // contradicts the anchored geometry seen by observer 1.
        let t = *zc.get(EntityId::Coordinator, EntityId::Guided).unwrap();
        zc.insert(ObservationTuple { measurement: Measurement::Sector(4), ..t });
        let (model, _) = qpf_mapping(&zc, &poses, 8, arena(), -1.0);
        assert_eq!(model.unwrap_err(), MappingError::Inconsistent);
        let (ok, _) = qpf_consistent(&zc, &poses, 8, arena(), -1.0);
        assert!(!ok.unwrap());
    }

    #[test]
    fn consistency_accepts_true_observations() {
        let poses = BTreeMap::from([
            (EntityId::Coordinator, Pose::new(100.0, 100.0, deg(0.0))),
            (EntityId::Observer(1), Pose::new(900.0, 150.0, deg(135.0))),
        ]);
        let zc = full_zc(&poses, (430.0, 520.0), (700.0, 600.0), 8);
        let (ok, _) = qpf_consistent(&zc, &poses, 8, arena(), -1.0);
        assert!(ok.unwrap());
    }

    #[test]
    fn predict_stops_just_past_a_sector_border() {
        // Single observer at the origin facing east, m = 8: the first border
        // CCW is the 45-degree ray. A particle at (10, 5) walking north
        // crosses it at y = 10.
        let obs = BTreeMap::from([(EntityId::Coordinator, Pose::new(0.0, 0.0, deg(0.0)))]);
        let mut rng = seeded_rng(1, 0);
        let mut p = Particle { pose: Pose::new(10.0, 5.0, deg(90.0)), weight: 1.0 };
        let steps = qpf_predict_translate(&mut p, &obs, 8, 1.0, 10_000, 0.0, &mut rng);
        assert_eq!(p.pose.x, 10.0);
        // The border ray belongs to the next sector, so the walk halts on
        // the first sample at or past y = 10.
        assert!(p.pose.y >= 10.0 && p.pose.y <= 11.0, "stopped at y = {}", p.pose.y);
        assert_eq!(steps, 5);
    }

    #[test]
    fn predict_respects_the_step_cap() {
        // Walking along the sector-0 bisector never changes region.
        let obs = BTreeMap::from([(EntityId::Coordinator, Pose::new(0.0, 0.0, deg(0.0)))]);
        let mut rng = seeded_rng(1, 0);
        let mut p = Particle { pose: Pose::new(100.0, 50.0, deg(22.5)), weight: 1.0 };
        let steps = qpf_predict_translate(&mut p, &obs, 8, 5.0, 40, 0.0, &mut rng);
        assert_eq!(steps, 40);
        let moved = (p.pose.x - 100.0).hypot(p.pose.y - 50.0);
        assert!((moved - 200.0).abs() < 1e-9);
    }

    #[test]
    fn finer_steps_stop_near_the_same_border() {
        let obs = BTreeMap::from([(EntityId::Coordinator, Pose::new(0.0, 0.0, deg(0.0)))]);
        let mut coarse = Particle { pose: Pose::new(10.0, 5.0, deg(90.0)), weight: 1.0 };
        let mut rng = seeded_rng(1, 0);
        let mut fine = Particle { pose: Pose::new(10.0, 5.0, deg(90.0)), weight: 1.0 };
        qpf_predict_translate(&mut coarse, &obs, 8, 1.0, 10_000, 0.0, &mut rng);
        qpf_predict_translate(&mut fine, &obs, 8, 0.1, 10_000, 0.0, &mut rng);
        assert!((coarse.pose.y - fine.pose.y).abs() <= 1.0);
    }

    #[test]
    fn weigh_assigns_exponential_weights() {
        let obs = BTreeMap::from([(EntityId::Coordinator, Pose::new(0.0, 0.0, deg(0.0)))]);
        let observed = RegionSignature(vec![0]);
        let mut particles = vec![
            Particle { pose: Pose::new(10.0, 1.0, deg(0.0)), weight: 0.0 }, // sector 0
            Particle { pose: Pose::new(1.0, 10.0, deg(0.0)), weight: 0.0 }, // sector 1
            Particle { pose: Pose::new(-10.0, 1.0, deg(0.0)), weight: 0.0 }, // sector 3
        ];
        qpf_weigh(&mut particles, &observed, &obs, 8, SignatureMetric::Literal);
        assert!((particles[0].weight - 1.0).abs() < 1e-12);
        assert!((particles[1].weight - (-1.0f64).exp()).abs() < 1e-12);
        assert!((particles[2].weight - (-3.0f64).exp()).abs() < 1e-12);
    }
}
