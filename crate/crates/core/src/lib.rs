//! Guided navigation for a sensorless robot steered by a team of observers.
//!
//! A guided agent with no useful sensors of its own is driven towards a goal
//! by a coordinator that only receives directional observations (egocentric
//! sector indices or noisy bearings) from a set of stationary observers. The
//! crate provides:
//!
//! * a sector-based direction calculus with a linear-programming model search
//!   ([`sectors`]),
//! * a fixed-step simulation kernel for the agents ([`sim`]),
//! * a generic particle filter toolbox ([`filter`]) with two navigation
//!   filters built on top of it: one purely qualitative ([`qpf`]) and one
//!   using triangulated coordinates ([`pfqc`]),
//! * two model-only baseline controllers ([`baselines`]),
//! * an experiment harness with deterministic batch runs and Welch's
//!   heteroscedastic one-way ANOVA for comparing methods ([`harness`],
//!   [`stats`]),
//! * CSV / JSONL / SVG reporting ([`output`]).
//!
//! All distances are centimetres, times are seconds, and angles are radians
//! internally (degrees at file boundaries).

pub mod angle;
pub mod baselines;
pub mod command;
pub mod entity;
pub mod filter;
pub mod harness;
pub mod observation;
pub mod output;
pub mod pfqc;
pub mod qpf;
pub mod rng;
pub mod scenario;
pub mod sectors;
pub mod sim;
pub mod stats;

pub use angle::Angle;
pub use command::Command;
pub use entity::{EntityId, Pose};
pub use scenario::ScenarioConfig;
