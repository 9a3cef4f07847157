//! Deterministic fixed-step world simulation.
//!
//! The guided agent is the only moving entity. Turn commands enqueue a
//! rotation (commanded angle plus one Gaussian actuation error drawn at
//! submission) executed at the configured angular speed; once the rotation
//! completes the agent walks forward until told otherwise. `MoveForward`
//! walks immediately and is not perturbed. Positions are clamped to the
//! arena per axis; no bounce.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::angle::Angle;
use crate::command::Command;
use crate::entity::{EntityId, Pose};
use crate::scenario::{Arena, ScenarioConfig, SpeedConfig};
use crate::sectors::{GeometryError, COINCIDENT_EPS};

/// What the guided agent is currently doing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Idle,
    /// Remaining rotation magnitude (rad) and direction (+1 CCW, -1 CW).
    Rotating { remaining: f64, dir: f64 },
    Walking,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub time: f64,
    pub poses: BTreeMap<EntityId, Pose>,
    pub goal: (f64, f64),
    pub motion: Motion,
    /// Sum of per-tick guided-agent displacements (after clamping).
    pub path_length: f64,
    arena: Arena,
    dt: f64,
    speeds: SpeedConfig,
    rotation_sigma: f64,
}

impl WorldState {
    pub fn from_config(cfg: &ScenarioConfig) -> WorldState {
        let poses = cfg.pose_map();
        let goal = poses[&EntityId::Goal].position();
        WorldState {
            time: 0.0,
            poses,
            goal,
            motion: Motion::Idle,
            path_length: 0.0,
            arena: cfg.arena,
            dt: cfg.dt_s,
            speeds: cfg.speeds,
            rotation_sigma: cfg.rotation_sigma(),
        }
    }

    /// Replace the initial poses (used by the batch runner's layout
    /// sampling). The goal point follows the goal entity.
    pub fn with_poses(mut self, poses: BTreeMap<EntityId, Pose>) -> WorldState {
        self.goal = poses[&EntityId::Goal].position();
        self.poses = poses;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn arena(&self) -> Arena {
        self.arena
    }

    pub fn guided(&self) -> Pose {
        self.poses[&EntityId::Guided]
    }

    pub fn pose(&self, id: EntityId) -> Pose {
        self.poses[&id]
    }

    /// True while a commanded rotation is still executing. Perception-based
    /// stop conditions are not evaluated in this phase.
    pub fn rotating(&self) -> bool {
        matches!(self.motion, Motion::Rotating { .. })
    }

    /// Accept a command for the guided agent. Turn commands draw their
    /// actuation error here, once per command.
    pub fn submit_command(&mut self, cmd: Command, rng: &mut impl Rng) {
        match cmd {
            Command::Stop => self.motion = Motion::Idle,
            Command::MoveForward => self.motion = Motion::Walking,
            Command::TurnLeft | Command::TurnRight | Command::MoveBackward => {
                let nominal = cmd.nominal_rotation().expect("turn command");
                let noise = if self.rotation_sigma > 0.0 {
                    Normal::new(0.0, self.rotation_sigma).expect("valid sigma").sample(rng)
                } else {
                    0.0
                };
                let total = nominal + noise;
                self.motion = Motion::Rotating { remaining: total.abs(), dir: total.signum() };
            }
        }
    }

    /// Advance one fixed step. A tick that finishes a rotation does not
    /// translate; walking starts on the following tick.
    pub fn tick(&mut self) {
        match self.motion {
            Motion::Idle => {}
            Motion::Rotating { remaining, dir } => {
                let step = (self.speeds.rotation_rad_s * self.dt).min(remaining);
                let guided = self.poses.get_mut(&EntityId::Guided).expect("guided pose");
                guided.theta = guided.theta.offset(dir * step);
                let left = remaining - step;
                self.motion = if left <= 1e-12 {
                    Motion::Walking
                } else {
                    Motion::Rotating { remaining: left, dir }
                };
            }
            Motion::Walking => {
                let guided = self.poses.get_mut(&EntityId::Guided).expect("guided pose");
                let step = self.speeds.translation_cm_s * self.dt;
                let nx = guided.x + step * guided.theta.cos();
                let ny = guided.y + step * guided.theta.sin();
                let cx = nx.clamp(0.0, self.arena.width_cm);
                let cy = ny.clamp(0.0, self.arena.height_cm);
                self.path_length += (cx - guided.x).hypot(cy - guided.y);
                guided.x = cx;
                guided.y = cy;
            }
        }
        self.time += self.dt;
    }

    /// Noisy egocentric direction from `observer` to `target`, relative to
    /// the observer's heading.
    pub fn perceive_bearing(
        &self,
        observer: EntityId,
        target: EntityId,
        sigma: f64,
        rng: &mut impl Rng,
    ) -> Result<Angle, GeometryError> {
        let o = self.poses[&observer];
        let t = self.poses[&target];
        let (dx, dy) = (t.x - o.x, t.y - o.y);
        if dx.hypot(dy) < COINCIDENT_EPS {
            return Err(GeometryError::Coincident);
        }
        let mut rel = dy.atan2(dx) - o.theta.radians();
        if sigma > 0.0 {
            rel += Normal::new(0.0, sigma).expect("valid sigma").sample(rng);
        }
        Ok(Angle::from_radians(crate::angle::normalize_radians(rel)).expect("finite bearing"))
    }

    /// Euclidean arrival test, boundary inclusive.
    pub fn goal_reached(&self, radius: f64) -> bool {
        let g = self.guided();
        (g.x - self.goal.0).hypot(g.y - self.goal.1) <= radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, streams};

    fn config(extra: &str) -> ScenarioConfig {
        let text = format!(
            r#"
m = 8
method = "qpf"
{extra}

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
y = 100.0
theta_deg = 90.0

[[entities]]
kind = "guided"
x = 500.0
y = 500.0
theta_deg = 0.0

[[entities]]
kind = "goal"
x = 800.0
y = 500.0
"#
        );
        ScenarioConfig::from_toml_str(&text).unwrap()
    }

    fn noiseless() -> ScenarioConfig {
        config("[noise]\nbearing_sigma_deg = 0.0\nrotation_sigma_deg = 0.0")
    }

    #[test]
    fn forward_walk_is_exact() {
        let mut w = WorldState::from_config(&noiseless());
        let mut rng = seeded_rng(1, streams::MOTION);
        w.submit_command(Command::MoveForward, &mut rng);
        for _ in 0..10 {
            w.tick();
        }
        let g = w.guided();
        assert!((g.x - 510.0).abs() < 1e-9, "x = {}", g.x);
        assert!((g.y - 500.0).abs() < 1e-9);
        assert!((w.path_length - 10.0).abs() < 1e-9);
        assert!((w.time - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_left_turn_ends_at_ninety_degrees() {
        let mut w = WorldState::from_config(&noiseless());
        let mut rng = seeded_rng(1, streams::MOTION);
        w.submit_command(Command::TurnLeft, &mut rng);
        assert!(w.rotating());
        // 90 degrees at 0.31 rad/s and dt 0.1: 51 ticks.
        let mut rot_ticks = 0;
        while w.rotating() {
            let before = w.guided().position();
            w.tick();
            rot_ticks += 1;
            assert_eq!(w.guided().position(), before, "no translation while rotating");
            assert!(rot_ticks < 100);
        }
        assert_eq!(rot_ticks, 51);
        assert!((w.guided().theta.degrees() - 90.0).abs() < 1e-9);
        // The next tick walks along the new heading.
        w.tick();
        assert!((w.guided().y - 501.0).abs() < 1e-9);
    }

    #[test]
    fn backward_turns_half_circle() {
        let mut w = WorldState::from_config(&noiseless());
        let mut rng = seeded_rng(1, streams::MOTION);
        w.submit_command(Command::MoveBackward, &mut rng);
        while w.rotating() {
            w.tick();
        }
        assert!((w.guided().theta.degrees() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn right_turn_is_clockwise() {
        let mut w = WorldState::from_config(&noiseless());
        let mut rng = seeded_rng(1, streams::MOTION);
        w.submit_command(Command::TurnRight, &mut rng);
        while w.rotating() {
            w.tick();
        }
        assert!((w.guided().theta.degrees() - 270.0).abs() < 1e-9);
    }

    #[test]
    fn stop_freezes_the_agent() {
        let mut w = WorldState::from_config(&noiseless());
        let mut rng = seeded_rng(1, streams::MOTION);
        w.submit_command(Command::MoveForward, &mut rng);
        w.tick();
        w.submit_command(Command::Stop, &mut rng);
        let p = w.guided().position();
        for _ in 0..5 {
            w.tick();
        }
        assert_eq!(w.guided().position(), p);
        assert!((w.time - 0.6).abs() < 1e-9);
    }

    #[test]
    fn arena_edge_clamps_without_bounce() {
        let mut cfg = noiseless();
        cfg.entities[2].x = 995.0;
        let mut w = WorldState::from_config(&cfg);
        let mut rng = seeded_rng(1, streams::MOTION);
        w.submit_command(Command::MoveForward, &mut rng);
        for _ in 0..20 {
            w.tick();
        }
        let g = w.guided();
        assert_eq!(g.x, 1000.0);
        assert_eq!(g.y, 500.0);
        // Path length counts only real displacement: 5 cm to the wall.
        assert!((w.path_length - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_noise_spreads_headings() {
        let cfg = config("");
        let mut rng = seeded_rng(7, streams::MOTION);
        let mut finals = Vec::new();
        for _ in 0..2000 {
            let mut w = WorldState::from_config(&cfg);
            w.submit_command(Command::TurnLeft, &mut rng);
            while w.rotating() {
                w.tick();
            }
            finals.push(w.guided().theta.degrees());
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var =
            finals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (finals.len() - 1) as f64;
        assert!((mean - 90.0).abs() < 0.2, "mean = {mean}");
        let std = var.sqrt();
        assert!((std - 2.0).abs() < 0.2, "std = {std}");
    }

    #[test]
    fn bearing_perception_noise_statistics() {
        let w = WorldState::from_config(&config(""));
        let mut rng = seeded_rng(3, streams::PERCEPTION);
        let sigma = 1.0f64.to_radians();
        let mut samples = Vec::new();
        for _ in 0..10_000 {
            let b = w
                .perceive_bearing(EntityId::Coordinator, EntityId::Guided, sigma, &mut rng)
                .unwrap();
            // Relative bearing of (500,500) from (100,100,theta=0) is 45 deg.
            samples.push(b.degrees() - 45.0);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let std = (samples.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64)
            .sqrt();
        assert!(mean.abs() < 0.05, "mean = {mean}");
        assert!((0.9..=1.1).contains(&std), "std = {std}");
    }

    #[test]
    fn heading_aligned_target_reads_zero() {
        let mut cfg = noiseless();
        cfg.entities[0].theta_deg = Some(90.0);
        cfg.entities[0].x = 500.0;
        cfg.entities[0].y = 100.0;
        let w = WorldState::from_config(&cfg);
        let mut rng = seeded_rng(1, streams::PERCEPTION);
        let b = w
            .perceive_bearing(EntityId::Coordinator, EntityId::Guided, 0.0, &mut rng)
            .unwrap();
        assert!(b.radians().abs() < 1e-12);
    }

    #[test]
    fn goal_boundary_is_inclusive() {
        let mut cfg = noiseless();
        cfg.entities[2].x = 750.0; // guided 50 cm from goal at (800, 500)
        let w = WorldState::from_config(&cfg);
        assert!(w.goal_reached(50.0));
        assert!(!w.goal_reached(49.9));
    }
}
