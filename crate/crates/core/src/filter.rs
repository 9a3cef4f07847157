//! Generic particle filter toolbox shared by both navigation filters:
//! particle release around a world model, rotation prediction, resampling,
//! and the modal-vote action selection.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::angle::Angle;
use crate::command::Command;
use crate::entity::{EntityId, Pose};
use crate::scenario::{CommandMapKind, ResamplingKind};
use crate::sectors::{command_for_sector, sector_of, sector_width, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose,
    pub weight: f64,
}

/// The full particle population: many guided-agent hypotheses, one exact
/// particle per observer, and position-only goal particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub guided: Vec<Particle>,
    pub observers: BTreeMap<EntityId, Pose>,
    pub goal: Vec<(f64, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("world model is missing entity {0}")]
    MissingEntity(EntityId),
    #[error("all particle weights are zero; the filter degenerated")]
    DegenerateWeights,
}

/// Spread parameters for particle release.
#[derive(Debug, Clone, Copy)]
pub struct ReleaseConfig {
    pub count: usize,
    /// Gaussian position spread around the model's guided position, cm.
    pub position_spread: f64,
    /// Gaussian heading spread when the guided heading is known, radians.
    pub heading_spread: f64,
    pub m: u32,
}

/// Draw the initial population around a freshly built world model. The
/// guided heading is taken from the model when present (tight Gaussian);
/// otherwise headings are sampled uniformly from the discrete set `Theta_m`.
pub fn release_particles(
    model: &WorldModel<EntityId>,
    observer_ids: &[EntityId],
    cfg: &ReleaseConfig,
    rng: &mut impl Rng,
) -> Result<ParticleSet, FilterError> {
    let mut observers = BTreeMap::new();
    for &id in observer_ids {
        let pose = model.pose(&id).ok_or(FilterError::MissingEntity(id))?;
        observers.insert(id, pose);
    }
    let guided_center = model
        .positions
        .get(&EntityId::Guided)
        .copied()
        .ok_or(FilterError::MissingEntity(EntityId::Guided))?;
    let goal = model
        .positions
        .get(&EntityId::Goal)
        .copied()
        .ok_or(FilterError::MissingEntity(EntityId::Goal))?;
    let known_heading = model.headings.get(&EntityId::Guided).copied();

    let pos = Normal::new(0.0, cfg.position_spread.max(0.0)).expect("valid spread");
    let eta = sector_width(cfg.m);
    let w = 1.0 / cfg.count as f64;
    let guided = (0..cfg.count)
        .map(|_| {
            let x = guided_center.0 + pos.sample(rng);
            let y = guided_center.1 + pos.sample(rng);
            let theta = match known_heading {
                Some(t) => t.offset(
                    Normal::new(0.0, cfg.heading_spread.max(0.0))
                        .expect("valid spread")
                        .sample(rng),
                ),
                None => {
                    let k = rng.random_range(0..cfg.m);
                    Angle::from_radians(k as f64 * eta).expect("finite heading")
                }
            };
            Particle { pose: Pose::new(x, y, theta), weight: w }
        })
        .collect();

    Ok(ParticleSet { guided, observers, goal: vec![goal] })
}

/// Apply the rotation part of a command to one particle: the commanded turn
/// plus one Gaussian actuation-error draw. Translation is method-specific
/// and handled separately.
pub fn predict_rotate(
    particle: &mut Particle,
    cmd: Command,
    sigma: f64,
    rng: &mut impl Rng,
) {
    let Some(nominal) = cmd.nominal_rotation() else { return };
    if nominal == 0.0 {
        // MoveForward commands no turn and draws no actuation error.
        return;
    }
    let noise = if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
    } else {
        0.0
    };
    particle.pose.theta = particle.pose.theta.offset(nominal + noise);
}

/// Draw a fresh population of equal size with probability proportional to
/// weight; output weights are uniform.
pub fn resample(
    particles: &[Particle],
    kind: ResamplingKind,
    rng: &mut impl Rng,
) -> Result<Vec<Particle>, FilterError> {
    let n = particles.len();
    debug_assert!(n > 0);
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(FilterError::DegenerateWeights);
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for p in particles {
        acc += p.weight;
        cumulative.push(acc);
    }
    let uniform_w = 1.0 / n as f64;
    let pick = |target: f64| {
        let idx = cumulative.partition_point(|&c| c < target).min(n - 1);
        Particle { pose: particles[idx].pose, weight: uniform_w }
    };
    let out = match kind {
        ResamplingKind::Multinomial => {
            (0..n).map(|_| pick(rng.random_range(0.0..total))).collect()
        }
        ResamplingKind::LowVariance => {
            let step = total / n as f64;
            let start = rng.random_range(0.0..step);
            (0..n).map(|i| pick(start + i as f64 * step)).collect()
        }
    };
    Ok(out)
}

/// Modal vote over guided particles: each particle maps the goal's sector in
/// its own frame to a command; a particle coincident with the goal votes
/// Stop. Ties resolve by the fixed command order.
pub fn choose_action(set: &ParticleSet, m: u32, map: CommandMapKind) -> Command {
    let goal = set.goal.first().copied().expect("at least one goal particle");
    let mut counts = [0u32; Command::TIE_ORDER.len()];
    for p in &set.guided {
        let vote = match sector_of(m, p.pose.position(), p.pose.theta, goal) {
            Ok(s) => command_for_sector(m, s, map),
            Err(_) => Command::Stop,
        };
        let slot = Command::TIE_ORDER.iter().position(|&c| c == vote).expect("command in order");
        counts[slot] += 1;
    }
    let best = counts.iter().enumerate().max_by_key(|&(i, &c)| (c, usize::MAX - i));
    Command::TIE_ORDER[best.expect("nonempty").0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, streams};
    use std::collections::BTreeMap;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d).unwrap()
    }

    fn model(guided_heading: Option<f64>) -> WorldModel<EntityId> {
        let mut positions = BTreeMap::new();
        positions.insert(EntityId::Coordinator, (100.0, 100.0));
        positions.insert(EntityId::Observer(1), (900.0, 100.0));
        positions.insert(EntityId::Guided, (500.0, 500.0));
        positions.insert(EntityId::Goal, (800.0, 500.0));
        let mut headings = BTreeMap::new();
        headings.insert(EntityId::Coordinator, deg(0.0));
        headings.insert(EntityId::Observer(1), deg(90.0));
        if let Some(t) = guided_heading {
            headings.insert(EntityId::Guided, deg(t));
        }
        WorldModel { m: 8, positions, headings, chebyshev_radius: None }
    }

    fn release_cfg() -> ReleaseConfig {
        ReleaseConfig { count: 200, position_spread: 50.0, heading_spread: 5f64.to_radians(), m: 8 }
    }

    #[test]
    fn release_with_known_heading_stays_tight() {
        let mut rng = seeded_rng(11, streams::FILTER);
        let set = release_particles(
            &model(Some(45.0)),
            &[EntityId::Coordinator, EntityId::Observer(1)],
            &release_cfg(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(set.guided.len(), 200);
        assert_eq!(set.observers.len(), 2);
        assert_eq!(set.goal, vec![(800.0, 500.0)]);
        for p in &set.guided {
            let dev = p.pose.theta.separation(deg(45.0)).to_degrees();
            assert!(dev < 25.0, "heading deviation {dev} deg");
            assert!((p.pose.x - 500.0).abs() < 300.0);
        }
        assert_eq!(set.observers[&EntityId::Coordinator], Pose::new(100.0, 100.0, deg(0.0)));
    }

    #[test]
    fn release_with_unknown_heading_is_discrete_uniform() {
        let mut rng = seeded_rng(12, streams::FILTER);
        let cfg = ReleaseConfig { count: 8000, ..release_cfg() };
        let set =
            release_particles(&model(None), &[EntityId::Coordinator], &cfg, &mut rng).unwrap();
        let mut hist = [0u32; 8];
        for p in &set.guided {
            let k = (p.pose.theta.radians() / (std::f64::consts::TAU / 8.0)).round() as usize % 8;
            let frac = p.pose.theta.radians() / (std::f64::consts::TAU / 8.0);
            assert!((frac - frac.round()).abs() < 1e-9, "heading off the discrete set");
            hist[k] += 1;
        }
        // Chi-squared against uniform: 7 dof, 1% critical value 18.48.
        let expected = 1000.0;
        let chi2: f64 = hist.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 18.48, "chi2 = {chi2}, hist = {hist:?}");
    }

    #[test]
    fn release_requires_all_entities() {
        let mut rng = seeded_rng(13, streams::FILTER);
        let mut m = model(Some(0.0));
        m.positions.remove(&EntityId::Goal);
        let err = release_particles(&m, &[EntityId::Coordinator], &release_cfg(), &mut rng)
            .unwrap_err();
        assert_eq!(err, FilterError::MissingEntity(EntityId::Goal));
    }

    #[test]
    fn predict_rotate_noiseless_matches_command() {
        let mut rng = seeded_rng(14, streams::FILTER);
        let mut p = Particle { pose: Pose::new(0.0, 0.0, deg(0.0)), weight: 1.0 };
        predict_rotate(&mut p, Command::TurnLeft, 0.0, &mut rng);
        assert!((p.pose.theta.degrees() - 90.0).abs() < 1e-12);
        predict_rotate(&mut p, Command::TurnRight, 0.0, &mut rng);
        assert!(p.pose.theta.degrees().abs() < 1e-12);
        predict_rotate(&mut p, Command::MoveBackward, 0.0, &mut rng);
        assert!((p.pose.theta.degrees() - 180.0).abs() < 1e-12);
        predict_rotate(&mut p, Command::MoveForward, 1.0, &mut rng);
        assert!((p.pose.theta.degrees() - 180.0).abs() < 1e-12, "forward must not turn");
    }

    #[test]
    fn predict_rotate_noise_statistics() {
        let mut rng = seeded_rng(15, streams::FILTER);
        let sigma = 2f64.to_radians();
        let mut samples = Vec::new();
        for _ in 0..10_000 {
            let mut p = Particle { pose: Pose::new(0.0, 0.0, deg(0.0)), weight: 1.0 };
            predict_rotate(&mut p, Command::TurnLeft, sigma, &mut rng);
            samples.push(p.pose.theta.degrees() - 90.0);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let std = (samples.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64)
            .sqrt();
        assert!(mean.abs() < 0.1, "mean = {mean}");
        assert!((std - 2.0).abs() < 0.2, "std = {std}");
    }

    fn uniform_particles(n: usize) -> Vec<Particle> {
        (0..n)
            .map(|i| Particle {
                pose: Pose::new(i as f64, 0.0, deg(0.0)),
                weight: 1.0 / n as f64,
            })
            .collect()
    }

    #[test]
    fn resample_single_survivor() {
        let mut rng = seeded_rng(16, streams::FILTER);
        let mut particles = uniform_particles(50);
        for p in &mut particles {
            p.weight = 0.0;
        }
        particles[17].weight = 1.0;
        for kind in [ResamplingKind::Multinomial, ResamplingKind::LowVariance] {
            let out = resample(&particles, kind, &mut rng).unwrap();
            assert_eq!(out.len(), 50);
            for p in &out {
                assert_eq!(p.pose.x, 17.0);
                assert!((p.weight - 0.02).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resample_all_zero_weights_is_degenerate() {
        let mut rng = seeded_rng(17, streams::FILTER);
        let mut particles = uniform_particles(10);
        for p in &mut particles {
            p.weight = 0.0;
        }
        let err = resample(&particles, ResamplingKind::Multinomial, &mut rng).unwrap_err();
        assert_eq!(err, FilterError::DegenerateWeights);
    }

    #[test]
    fn resample_is_unbiased() {
        // Two particles at weights 0.25 / 0.75: offspring of the second
        // should be ~75% over many trials.
        let mut rng = seeded_rng(18, streams::FILTER);
        let particles = vec![
            Particle { pose: Pose::new(0.0, 0.0, deg(0.0)), weight: 0.25 },
            Particle { pose: Pose::new(1.0, 0.0, deg(0.0)), weight: 0.75 },
        ];
        for kind in [ResamplingKind::Multinomial, ResamplingKind::LowVariance] {
            let mut second = 0u32;
            let trials = 5000;
            for _ in 0..trials {
                for p in resample(&particles, kind, &mut rng).unwrap() {
                    if p.pose.x == 1.0 {
                        second += 1;
                    }
                }
            }
            let frac = second as f64 / (2 * trials) as f64;
            assert!((frac - 0.75).abs() < 0.02, "{kind:?}: fraction = {frac}");
        }
    }

    fn voting_set(poses: Vec<Pose>, goal: (f64, f64)) -> ParticleSet {
        let n = poses.len();
        ParticleSet {
            guided: poses
                .into_iter()
                .map(|pose| Particle { pose, weight: 1.0 / n as f64 })
                .collect(),
            observers: BTreeMap::new(),
            goal: vec![goal],
        }
    }

    #[test]
    fn single_particle_facing_goal_votes_forward() {
        let set = voting_set(vec![Pose::new(0.0, 0.0, deg(0.0))], (100.0, 0.0));
        assert_eq!(choose_action(&set, 8, CommandMapKind::Calibrated), Command::MoveForward);
    }

    #[test]
    fn majority_wins() {
        // Three particles see the goal to their left, two to their right.
        let left = Pose::new(0.0, 0.0, deg(0.0));
        let right = Pose::new(0.0, 0.0, deg(180.0));
        let set = voting_set(vec![left, left, left, right, right], (0.0, 100.0));
        assert_eq!(choose_action(&set, 8, CommandMapKind::Calibrated), Command::TurnLeft);
    }

    #[test]
    fn tie_resolves_by_fixed_order() {
        let left = Pose::new(0.0, 0.0, deg(0.0));
        let right = Pose::new(0.0, 0.0, deg(180.0));
        let set = voting_set(vec![left, right], (0.0, 100.0));
        // TurnLeft and TurnRight tie 1-1; TurnLeft precedes in the order.
        assert_eq!(choose_action(&set, 8, CommandMapKind::Calibrated), Command::TurnLeft);
    }

    #[test]
    fn coincident_particle_votes_stop() {
        let set = voting_set(vec![Pose::new(5.0, 5.0, deg(0.0))], (5.0, 5.0));
        assert_eq!(choose_action(&set, 8, CommandMapKind::Calibrated), Command::Stop);
    }

    #[test]
    fn choose_action_ignores_weights_and_order() {
        let a = Pose::new(0.0, 0.0, deg(0.0));
        let b = Pose::new(0.0, 0.0, deg(180.0));
        let mut set = voting_set(vec![a, a, b], (0.0, 100.0));
        let forward = choose_action(&set, 8, CommandMapKind::Calibrated);
        set.guided.reverse();
        set.guided[0].weight = 100.0;
        assert_eq!(choose_action(&set, 8, CommandMapKind::Calibrated), forward);
    }
}
