//! Particle filter with qualitative commands.
//!
//! Unlike the sector filter, this method maps numerically: observers report
//! continuous bearings, targets are triangulated by least-squares ray
//! intersection, and particles carry metric positions weighted by a Gaussian
//! kernel around the latest triangulated fix. Command emission still goes
//! through the shared sector command map, so the guidance vocabulary stays
//! qualitative.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::angle::Angle;
use crate::entity::{EntityId, Pose};
use crate::filter::Particle;
use crate::observation::ObservationSet;
use crate::sectors::WorldModel;

/// Rays whose normal matrix has a (normalized) determinant at or below this
/// are treated as parallel.
const DET_TOL: f64 = 1e-9;

/// Tolerance on the update-interval comparison; absorbs the rounding drift
/// of summing many fixed-size ticks.
const TAU_TOL: f64 = 1e-9;

/// A sight line in the global frame: ray from the observer's position along
/// the absolute angle `alpha` (observer heading plus relative bearing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingRay {
    pub origin: (f64, f64),
    pub alpha: Angle,
}

#[derive(Debug, Error, PartialEq)]
pub enum TriangulationError {
    #[error("need at least two sight lines, got {0}")]
    TooFewRays(usize),
    #[error("sight lines are parallel or nearly so")]
    IllConditioned,
}

/// Least-squares intersection of sight lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: (f64, f64),
    /// Sum of squared perpendicular distances from the point to the rays.
    pub residual: f64,
}

/// The point minimizing the summed squared perpendicular distance to all
/// rays. With two clean rays this is their intersection.
pub fn triangulate_rays(rays: &[BearingRay]) -> Result<Triangulation, TriangulationError> {
    if rays.len() < 2 {
        return Err(TriangulationError::TooFewRays(rays.len()));
    }
    // Each ray contributes (n . (x - p))^2 with n the unit normal, giving
    // the normal equations M x = sum of n n^T p.
    let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
    let (mut b0, mut b1) = (0.0, 0.0);
    for ray in rays {
        let (nx, ny) = (-ray.alpha.sin(), ray.alpha.cos());
        let (px, py) = ray.origin;
        let np = nx * px + ny * py;
        m00 += nx * nx;
        m01 += nx * ny;
        m11 += ny * ny;
        b0 += nx * np;
        b1 += ny * np;
    }
    // trace(M) = ray count, so det relative to (k/2)^2 is scale-free. Two
    // rays crossing at angle phi give a normalized det of sin^2(phi).
    let det = m00 * m11 - m01 * m01;
    let half_trace = (m00 + m11) / 2.0;
    if det <= DET_TOL * half_trace * half_trace {
        return Err(TriangulationError::IllConditioned);
    }
    let x = (m11 * b0 - m01 * b1) / det;
    let y = (m00 * b1 - m01 * b0) / det;
    let residual = rays
        .iter()
        .map(|ray| {
            let (nx, ny) = (-ray.alpha.sin(), ray.alpha.cos());
            let d = nx * (x - ray.origin.0) + ny * (y - ray.origin.1);
            d * d
        })
        .sum();
    Ok(Triangulation { point: (x, y), residual })
}

/// All sight lines to `target` carried by the observation set, in ascending
/// observer order. The stored bearings are observer-relative; here they are
/// lifted to the global frame.
pub fn rays_to_target(
    zc: &ObservationSet,
    observer_poses: &BTreeMap<EntityId, Pose>,
    target: EntityId,
) -> Vec<BearingRay> {
    zc.bearings_of_target(target)
        .iter()
        .filter_map(|(observer, &bearing)| {
            let pose = observer_poses.get(observer)?;
            Some(BearingRay {
                origin: pose.position(),
                alpha: pose.theta.offset(bearing.radians()),
            })
        })
        .collect()
}

/// Distance from the coordinator to each triangulated target.
pub type DistanceTable = BTreeMap<EntityId, f64>;

#[derive(Debug, Error, PartialEq)]
pub enum PfqcMappingError {
    #[error("no coordinator pose supplied")]
    MissingCoordinator,
    #[error("coordinator carries no bearing to {0:?}")]
    MissingBearing(EntityId),
    #[error("triangulating {target:?}: {source}")]
    Triangulation {
        target: EntityId,
        source: TriangulationError,
    },
}

/// Polar placement from the coordinator: distance `d` along the absolute
/// angle `alpha`.
pub fn place_from_coordinator(coordinator: (f64, f64), alpha: Angle, d: f64) -> (f64, f64) {
    (coordinator.0 + d * alpha.cos(), coordinator.1 + d * alpha.sin())
}

/// Build a metric world model from bearing observations. Targets without a
/// known pose (the guided agent and the goal) are triangulated; the model
/// then places each at its triangulated distance from the coordinator along
/// the coordinator's own sight line. Observer poses are kept as given.
pub fn pfqc_mapping(
    zc: &ObservationSet,
    observer_poses: &BTreeMap<EntityId, Pose>,
    m: u32,
) -> Result<(WorldModel<EntityId>, DistanceTable), PfqcMappingError> {
    let coordinator = observer_poses
        .get(&EntityId::Coordinator)
        .ok_or(PfqcMappingError::MissingCoordinator)?;
    let coord_pos = coordinator.position();

    let mut positions: BTreeMap<EntityId, (f64, f64)> =
        observer_poses.iter().map(|(&id, p)| (id, p.position())).collect();
    let mut headings = zc.observer_headings();
    for (&id, pose) in observer_poses {
        headings.entry(id).or_insert(pose.theta);
    }
    if let Some(theta) = zc.guided_heading() {
        headings.insert(EntityId::Guided, theta);
    }

    let mut distances = DistanceTable::new();
    for target in [EntityId::Guided, EntityId::Goal] {
        let rays = rays_to_target(zc, observer_poses, target);
        let tri = triangulate_rays(&rays)
            .map_err(|source| PfqcMappingError::Triangulation { target, source })?;
        let d = coordinator.distance_to(tri.point);
        let alpha_c = zc
            .get(EntityId::Coordinator, target)
            .and_then(|t| t.bearing())
            .ok_or(PfqcMappingError::MissingBearing(target))?;
        let global = coordinator.theta.offset(alpha_c.radians());
        positions.insert(target, place_from_coordinator(coord_pos, global, d));
        distances.insert(target, d);
    }

    Ok((WorldModel { m, positions, headings, chebyshev_radius: None }, distances))
}

/// Advance a particle along its heading by a Gaussian estimate of the
/// distance walked in `elapsed` seconds. Negative samples clamp to zero: the
/// agent never walks backwards during a forward segment.
pub fn pfqc_predict_translate<R: Rng + ?Sized>(
    particle: &mut Particle,
    elapsed_s: f64,
    speed_cm_s: f64,
    sigma_dist_cm: f64,
    rng: &mut R,
) {
    if elapsed_s <= 0.0 {
        return;
    }
    let normal = Normal::new(speed_cm_s * elapsed_s, sigma_dist_cm)
        .expect("nonnegative finite spread");
    let d = normal.sample(rng).max(0.0);
    particle.pose.x += d * particle.pose.theta.cos();
    particle.pose.y += d * particle.pose.theta.sin();
}

/// True once at least `tau` seconds have passed since the last update.
pub fn pfqc_stop(now_s: f64, last_update_s: f64, tau_s: f64) -> bool {
    now_s - last_update_s >= tau_s - TAU_TOL
}

/// Gaussian importance weight for a particle `distance_cm` away from the
/// triangulated fix.
pub fn pfqc_weight(distance_cm: f64, sigma_update_cm: f64) -> f64 {
    (-(distance_cm * distance_cm) / (2.0 * sigma_update_cm * sigma_update_cm)).exp()
}

/// Re-triangulate the guided agent from fresh bearings and weight every
/// particle by its distance to the fix. Returns the fix so callers can trace
/// it; resampling is left to the caller. A triangulation failure leaves the
/// weights untouched.
pub fn pfqc_weigh(
    particles: &mut [Particle],
    zc: &ObservationSet,
    observer_poses: &BTreeMap<EntityId, Pose>,
    sigma_update_cm: f64,
) -> Result<(f64, f64), TriangulationError> {
    let rays = rays_to_target(zc, observer_poses, EntityId::Guided);
    let tri = triangulate_rays(&rays)?;
    for p in particles.iter_mut() {
        p.weight = pfqc_weight(p.pose.distance_to(tri.point), sigma_update_cm);
    }
    Ok(tri.point)
}
