//! Scenario configuration: the single TOML document that fully describes an
//! experiment. Unknown keys are rejected so that typos fail loudly.
//!
//! Units at this boundary are centimetres, seconds and degrees; they are
//! converted to radians internally.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::Angle;
use crate::entity::{EntityId, Pose};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Navigation method run by the coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SingleCommand,
    MultipleUpdates,
    Qpf,
    Pfqc,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::SingleCommand => "single_command",
            Method::MultipleUpdates => "multiple_updates",
            Method::Qpf => "qpf",
            Method::Pfqc => "pfqc",
        }
    }
}

/// When an episode counts as arrived.
///
/// `Region` ends the episode when the guided agent enters the cell of the
/// sector arrangement that contains the goal, so coarser sector granularities
/// give larger goal regions. `Radius` uses a fixed Euclidean disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    #[default]
    Region,
    Radius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingKind {
    #[default]
    Multinomial,
    LowVariance,
}

/// Distance between two region signatures: plain component differences, or
/// wrapped differences that treat sector m-1 and sector 0 as adjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignatureMetric {
    #[default]
    Literal,
    Circular,
}

/// Mapping from goal sectors to commands. `Calibrated` centres the forward
/// range on sector 0 (goal dead ahead means move forward); `Literal` keeps
/// the historical label assignment where the forward range sits opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CommandMapKind {
    #[default]
    Calibrated,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub width_cm: f64,
    pub height_cm: f64,
}

impl Arena {
    pub fn diagonal(&self) -> f64 {
        (self.width_cm.powi(2) + self.height_cm.powi(2)).sqrt()
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= 0.0 && p.0 <= self.width_cm && p.1 >= 0.0 && p.1 <= self.height_cm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Std of the bearing noise observers add to every perceived direction.
    pub bearing_sigma_deg: f64,
    /// Std of the actuation error added to every commanded turn.
    pub rotation_sigma_deg: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { bearing_sigma_deg: 1.0, rotation_sigma_deg: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedConfig {
    pub translation_cm_s: f64,
    pub rotation_rad_s: f64,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        SpeedConfig { translation_cm_s: 10.0, rotation_rad_s: 0.31 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Std of the Gaussian position spread when particles are released.
    pub position_spread_cm: f64,
    /// Std of the heading spread when the guided heading is known.
    pub heading_spread_deg: f64,
    pub resampling: ResamplingKind,
    /// Step length of the region-crossing translation prediction.
    pub qpf_step_cm: f64,
    /// Isotropic roughening applied to each guided particle before its
    /// predicted walk. Keeps resampling duplicates from collapsing onto
    /// identical trajectories.
    pub qpf_jitter_cm: f64,
    /// Consecutive ticks a changed signature must persist before the
    /// region-change stop fires. 1 reacts to a single noisy flicker.
    pub stop_confirm_ticks: u32,
    pub signature_metric: SignatureMetric,
    /// Std of the Gaussian weight kernel of the coordinate filter.
    pub pfqc_sigma_update_cm: f64,
    /// Std of the predicted walk distance of the coordinate filter.
    pub pfqc_sigma_dist_cm: f64,
    /// Model rebuild / filter reinitialization budget per episode.
    pub retry_cap: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            position_spread_cm: 50.0,
            heading_spread_deg: 5.0,
            resampling: ResamplingKind::Multinomial,
            qpf_step_cm: 5.0,
            qpf_jitter_cm: 5.0,
            stop_confirm_ticks: 5,
            signature_metric: SignatureMetric::Literal,
            pfqc_sigma_update_cm: 30.0,
            pfqc_sigma_dist_cm: 5.0,
            retry_cap: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpConfig {
    /// Right-hand side of the strict side of every sector constraint. The
    /// default of -1 forces a one-centimetre separation margin.
    pub epsilon: f64,
    pub command_map: CommandMapKind,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig { epsilon: -1.0, command_map: CommandMapKind::Calibrated }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Coordinator,
    Observer,
    Guided,
    Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConfig {
    pub kind: EntityKind,
    pub x: f64,
    pub y: f64,
    /// Heading in degrees. Required for everything except the goal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    /// Display colour for plots; defaults depend on the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colour: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub arena: Arena,
    /// Sector granularity: even, at least 4, and divisible by 8 whenever
    /// commands are issued.
    pub m: u32,
    pub method: Method,
    /// Update interval of the coordinate filter, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    #[serde(default = "default_particle_count")]
    pub particle_count: usize,
    /// Whether the guided agent knows and reports its own heading.
    #[serde(default = "default_true")]
    pub orientation_known: bool,
    #[serde(default)]
    pub arrival: ArrivalMode,
    #[serde(default = "default_goal_radius")]
    pub goal_radius_cm: f64,
    #[serde(default = "default_timeout")]
    pub episode_timeout_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub speeds: SpeedConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub lp: LpConfig,
    pub entities: Vec<EntityConfig>,
}

fn default_particle_count() -> usize {
    200
}
fn default_true() -> bool {
    true
}
fn default_goal_radius() -> f64 {
    50.0
}
fn default_timeout() -> f64 {
    600.0
}
fn default_dt() -> f64 {
    0.1
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
        let text = fs::read_to_string(path)?;
        ScenarioConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Entity identities in declaration order. Numbered observers count from 1.
    pub fn entity_ids(&self) -> Vec<EntityId> {
        let mut ids = Vec::with_capacity(self.entities.len());
        let mut observer = 0u8;
        for e in &self.entities {
            ids.push(match e.kind {
                EntityKind::Coordinator => EntityId::Coordinator,
                EntityKind::Observer => {
                    observer += 1;
                    EntityId::Observer(observer)
                }
                EntityKind::Guided => EntityId::Guided,
                EntityKind::Goal => EntityId::Goal,
            });
        }
        ids
    }

    /// Observer identities (coordinator first), in canonical order.
    pub fn observer_ids(&self) -> Vec<EntityId> {
        let mut obs: Vec<EntityId> =
            self.entity_ids().into_iter().filter(|id| id.is_observer()).collect();
        obs.sort();
        obs
    }

    /// Initial poses keyed by identity. The goal has no heading; it is
    /// stored with heading zero and never read.
    pub fn pose_map(&self) -> BTreeMap<EntityId, Pose> {
        let ids = self.entity_ids();
        ids.into_iter()
            .zip(&self.entities)
            .map(|(id, e)| {
                let theta = Angle::from_degrees(e.theta_deg.unwrap_or(0.0))
                    .expect("validated finite heading");
                (id, Pose::new(e.x, e.y, theta))
            })
            .collect()
    }

    pub fn bearing_sigma(&self) -> f64 {
        self.noise.bearing_sigma_deg.to_radians()
    }

    pub fn rotation_sigma(&self) -> f64 {
        self.noise.rotation_sigma_deg.to_radians()
    }

    pub fn heading_spread(&self) -> f64 {
        self.filter.heading_spread_deg.to_radians()
    }

    /// Cap on the region-crossing prediction: enough steps to cross the arena.
    pub fn qpf_max_steps(&self) -> u32 {
        (self.arena.diagonal() / self.filter.qpf_step_cm).ceil() as u32
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.arena.width_cm > 0.0) || !(self.arena.height_cm > 0.0) {
            return Err(invalid("arena dimensions must be positive"));
        }
        if self.m < 4 || self.m % 2 != 0 {
            return Err(invalid(format!("m must be even and at least 4, got {}", self.m)));
        }
        if self.m % 8 != 0 {
            return Err(invalid(format!(
                "m must be divisible by 8 so goal sectors map onto the four commands, got {}",
                self.m
            )));
        }
        match (self.method, self.tau_s) {
            (Method::Pfqc, None) => {
                return Err(invalid("method \"pfqc\" requires tau_s"));
            }
            (Method::Pfqc, Some(tau)) if !(tau > 0.0) => {
                return Err(invalid("tau_s must be positive"));
            }
            _ => {}
        }
        if self.particle_count == 0 {
            return Err(invalid("particle_count must be at least 1"));
        }
        if !(self.goal_radius_cm > 0.0) {
            return Err(invalid("goal_radius_cm must be positive"));
        }
        if !(self.episode_timeout_s > 0.0) {
            return Err(invalid("episode_timeout_s must be positive"));
        }
        if !(self.dt_s > 0.0) {
            return Err(invalid("dt_s must be positive"));
        }
        if !(self.speeds.translation_cm_s > 0.0) || !(self.speeds.rotation_rad_s > 0.0) {
            return Err(invalid("speeds must be positive"));
        }
        if self.noise.bearing_sigma_deg < 0.0 || self.noise.rotation_sigma_deg < 0.0 {
            return Err(invalid("noise sigmas must be nonnegative"));
        }
        if !(self.filter.qpf_step_cm > 0.0) {
            return Err(invalid("qpf_step_cm must be positive"));
        }
        if !(self.filter.pfqc_sigma_update_cm > 0.0) {
            return Err(invalid("pfqc_sigma_update_cm must be positive"));
        }
        if self.filter.pfqc_sigma_dist_cm < 0.0 {
            return Err(invalid("pfqc_sigma_dist_cm must be nonnegative"));
        }
        if self.lp.epsilon > 0.0 {
            return Err(invalid("lp.epsilon must be nonpositive"));
        }

        let mut coordinators = 0;
        let mut guided = 0;
        let mut goals = 0;
        for e in &self.entities {
            match e.kind {
                EntityKind::Coordinator => coordinators += 1,
                EntityKind::Guided => guided += 1,
                EntityKind::Goal => goals += 1,
                EntityKind::Observer => {}
            }
            if e.kind != EntityKind::Goal && e.theta_deg.is_none() {
                return Err(invalid(format!("{:?} entity is missing theta_deg", e.kind)));
            }
            if let Some(t) = e.theta_deg {
                if !t.is_finite() {
                    return Err(invalid("theta_deg must be finite"));
                }
            }
            if !self.arena.contains((e.x, e.y)) {
                return Err(invalid(format!(
                    "entity at ({}, {}) lies outside the arena",
                    e.x, e.y
                )));
            }
        }
        if coordinators != 1 {
            return Err(invalid(format!("exactly one coordinator required, got {coordinators}")));
        }
        if guided != 1 {
            return Err(invalid(format!("exactly one guided agent required, got {guided}")));
        }
        if goals != 1 {
            return Err(invalid(format!("exactly one goal required, got {goals}")));
        }
        for (i, a) in self.entities.iter().enumerate() {
            for b in self.entities.iter().skip(i + 1) {
                let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
                if d < 1.0 {
                    return Err(invalid(format!(
                        "entities at ({}, {}) and ({}, {}) are closer than 1 cm",
                        a.x, a.y, b.x, b.y
                    )));
                }
            }
        }
        Ok(())
    }
}
