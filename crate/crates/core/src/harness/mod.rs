//! Episode orchestration: runs one guidance episode from observation to
//! arrival (or failure) under any of the four methods, with deterministic
//! seeding, work metering and optional tracing.
//!
//! The per-episode flow is: observe everything once, build the initial world
//! model (retrying on fresh observations up to a cap), release particles if
//! the method uses them, then loop choose -> predict -> submit -> move until
//! the method's stop condition -> re-observe the guided agent -> update,
//! until the guided agent truly arrives or the episode times out.

pub mod batch;
pub mod cost;

use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{baseline_mapping, command_from_model};
use crate::command::Command;
use crate::entity::{EntityId, Pose};
use crate::filter::{
    choose_action, predict_rotate, release_particles, resample, FilterError, ParticleSet,
    ReleaseConfig,
};
use crate::harness::cost::{
    CostMeter, C_DIST, C_EXP, C_MAP, C_RAY, C_RELEASE, C_RESAMPLE, C_SECTOR, C_SOLVE2,
};
use crate::observation::{Measurement, ObservationSet, ObservationTuple};
use crate::pfqc::{
    pfqc_mapping, pfqc_predict_translate, pfqc_stop, pfqc_weigh, PfqcMappingError,
};
use crate::qpf::{
    qpf_consistent, qpf_mapping, qpf_predict_translate, qpf_weigh, region_of, MappingError,
    RegionSignature,
};
use crate::angle::Angle;
use crate::rng::{seeded_rng, streams};
use crate::scenario::{ArrivalMode, ConfigError, Method, ScenarioConfig};
use crate::sectors::{sector_of_bearing, SearchError, WorldModel};
use crate::sim::WorldState;

/// Why an episode ended without reaching the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// Simulated time exceeded the configured budget.
    Timeout,
    /// No consistent world model within the retry budget.
    ModelFail,
    /// Particle weights collapsed and reinitialization budget ran out.
    Degenerate,
}

impl FailureReason {
    pub fn label(self) -> &'static str {
        match self {
            FailureReason::Timeout => "timeout",
            FailureReason::ModelFail => "model_fail",
            FailureReason::Degenerate => "degenerate",
        }
    }
}

/// Outcome and metrics of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    /// Non-Stop commands issued to the guided agent.
    pub instructions: u64,
    /// Mean coordinator-inference milliseconds per instruction on the
    /// deterministic operation-count clock.
    pub proc_ms_per_instruction: f64,
    /// Integrated guided-agent path, cm.
    pub path_cm: f64,
    /// Simulated episode duration, s.
    pub sim_time_s: f64,
    /// Total metered operations (the numerator behind the proc time).
    pub total_ops: u64,
    /// Host wall-clock milliseconds per instruction; measured only on
    /// request, since it is inherently non-reproducible.
    pub wall_ms_per_instruction: Option<f64>,
    pub failure: Option<FailureReason>,
}

/// Hard failures that abort an episode instead of scoring it.
#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure in model search: {0}")]
    Numerical(String),
    #[error("episode setup is inconsistent: {0}")]
    Setup(String),
}

/// What a trace record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEventKind {
    /// One simulation tick.
    Tick,
    /// A command was submitted to the guided agent.
    Command,
    /// A filter or model update completed.
    Update,
}

/// One observation point for trace sinks. Borrowed views keep the hot path
/// allocation-free when tracing is off.
pub struct TraceRecord<'a> {
    pub t: f64,
    pub kind: TraceEventKind,
    pub poses: &'a BTreeMap<EntityId, Pose>,
    pub command: Option<Command>,
    pub signature: Option<&'a [u32]>,
    pub particles: Option<&'a ParticleSet>,
    /// Latest triangulated guided-position estimate, when the method has one.
    pub fix: Option<(f64, f64)>,
}

pub trait TraceSink {
    fn record(&mut self, rec: TraceRecord<'_>);
}

/// Optional knobs for one episode run.
#[derive(Default)]
pub struct EpisodeOptions<'a> {
    /// Replace the configured initial poses (batch layout sampling).
    pub poses: Option<BTreeMap<EntityId, Pose>>,
    pub trace: Option<&'a mut dyn TraceSink>,
    /// Also measure host wall time (non-reproducible; off by default).
    pub measure_wall: bool,
}

enum Controller {
    Single { command: Command, issued: bool },
    Multiple { model: WorldModel<EntityId>, last_sig: RegionSignature },
    Qpf { particles: ParticleSet, last_sig: RegionSignature },
    Pfqc { particles: ParticleSet, last_update_s: f64 },
}

enum End {
    Success,
    Fail(FailureReason),
}

struct Episode<'a, 'b> {
    cfg: &'a ScenarioConfig,
    state: WorldState,
    observer_ids: Vec<EntityId>,
    /// Observer poses never change during an episode.
    observers: BTreeMap<EntityId, Pose>,
    /// The goal's region signature under the true observer poses, for the
    /// qualitative arrival test.
    goal_region: Option<RegionSignature>,
    zc: ObservationSet,
    motion_rng: ChaCha8Rng,
    perception_rng: ChaCha8Rng,
    filter_rng: ChaCha8Rng,
    meter: CostMeter,
    retries_left: u32,
    trace: Option<&'b mut dyn TraceSink>,
}

impl<'a, 'b> Episode<'a, 'b> {
    fn trace(&mut self, kind: TraceEventKind, command: Option<Command>, controller: Option<&Controller>) {
        let Some(sink) = self.trace.as_deref_mut() else { return };
        let (signature, particles, fix) = match controller {
            Some(Controller::Qpf { particles, last_sig }) => {
                (Some(last_sig.components()), Some(particles), None)
            }
            Some(Controller::Pfqc { particles, .. }) => (None, Some(particles), None),
            Some(Controller::Multiple { last_sig, .. }) => {
                (Some(last_sig.components()), None, None)
            }
            _ => (None, None, None),
        };
        sink.record(TraceRecord {
            t: self.state.time,
            kind,
            poses: &self.state.poses,
            command,
            signature,
            particles,
            fix,
        });
    }

    /// True arrival, judged on ground-truth geometry: the observers can see
    /// the real world and stop the guided agent the moment it is there.
    fn arrived(&self) -> bool {
        match self.cfg.arrival {
            ArrivalMode::Radius => self.state.goal_reached(self.cfg.goal_radius_cm),
            ArrivalMode::Region => match (&self.goal_region, self.guided_region()) {
                (Some(goal), Some(here)) => *goal == here,
                _ => false,
            },
        }
    }

    fn guided_region(&self) -> Option<RegionSignature> {
        region_of(self.state.guided().position(), &self.observers, self.cfg.m).ok()
    }

    fn timed_out(&self) -> bool {
        self.state.time >= self.cfg.episode_timeout_s - 1e-9
    }

    /// One noisy measurement of `target` from `observer`, in the method's
    /// native representation.
    fn measure(&mut self, observer: EntityId, target: EntityId) -> Option<Measurement> {
        let bearing = self
            .state
            .perceive_bearing(observer, target, self.cfg.bearing_sigma(), &mut self.perception_rng)
            .ok()?;
        Some(match self.cfg.method {
            Method::Pfqc => Measurement::Bearing(bearing),
            _ => Measurement::Sector(sector_of_bearing(self.cfg.m, Angle::ZERO, bearing)),
        })
    }

    /// Observe every entity from every observer, replacing the whole set.
    fn observe_full(&mut self) {
        let mut zc = ObservationSet::new();
        let targets: Vec<EntityId> = self.state.poses.keys().copied().collect();
        for o in self.observer_ids.clone() {
            let heading = self.state.pose(o).theta;
            for &t in &targets {
                if t == o {
                    continue;
                }
                if let Some(measurement) = self.measure(o, t) {
                    zc.insert(ObservationTuple {
                        observer: o,
                        target: t,
                        measurement,
                        observer_heading: heading,
                    });
                }
            }
        }
        if self.cfg.orientation_known {
            zc.set_guided_heading(Some(self.state.guided().theta));
        }
        self.zc = zc;
    }

    /// Re-observe only the guided agent (the one entity that moves),
    /// replacing its tuples in place.
    fn refresh_guided(&mut self) {
        for o in self.observer_ids.clone() {
            let heading = self.state.pose(o).theta;
            if let Some(measurement) = self.measure(o, EntityId::Guided) {
                self.zc.insert(ObservationTuple {
                    observer: o,
                    target: EntityId::Guided,
                    measurement,
                    observer_heading: heading,
                });
            }
        }
        if self.cfg.orientation_known {
            self.zc.set_guided_heading(Some(self.state.guided().theta));
        }
    }

    /// The guided agent's region as the observers currently (noisily)
    /// perceive it. Draws fresh perception noise.
    fn perceived_signature(&mut self) -> RegionSignature {
        let sigma = self.cfg.bearing_sigma();
        let mut components = Vec::with_capacity(self.observer_ids.len());
        for o in self.observer_ids.clone() {
            let sector = self
                .state
                .perceive_bearing(o, EntityId::Guided, sigma, &mut self.perception_rng)
                .map(|b| sector_of_bearing(self.cfg.m, Angle::ZERO, b))
                .unwrap_or(0);
            components.push(sector);
        }
        RegionSignature(components)
    }

    /// The signature recorded in the current observation set.
    fn signature_from_zc(&self) -> RegionSignature {
        let sectors = self.zc.sectors_of_target(EntityId::Guided);
        RegionSignature(self.observer_ids.iter().map(|o| sectors.get(o).copied().unwrap_or(0)).collect())
    }

    /// One model-construction attempt from the current observation set.
    /// `Ok(None)` is a soft failure worth retrying on fresh observations.
    fn try_mapping(&mut self) -> Result<Option<WorldModel<EntityId>>, EpisodeError> {
        match self.cfg.method {
            Method::Qpf => {
                let (model, stats) = qpf_mapping(
                    &self.zc,
                    &self.observers,
                    self.cfg.m,
                    self.cfg.arena,
                    self.cfg.lp.epsilon,
                );
                self.meter.add_search(&stats);
                match model {
                    Ok(model) => Ok(Some(model)),
                    Err(MappingError::Inconsistent) => Ok(None),
                    Err(MappingError::Search(e)) => Err(EpisodeError::Numerical(e.to_string())),
                }
            }
            Method::Pfqc => {
                let n = self.observer_ids.len() as u64;
                self.meter.add(2 * n * C_RAY + 2 * C_SOLVE2);
                match pfqc_mapping(&self.zc, &self.observers, self.cfg.m) {
                    Ok((model, _distances)) => Ok(Some(model)),
                    Err(PfqcMappingError::Triangulation { .. }) => Ok(None),
                    Err(e) => Err(EpisodeError::Setup(e.to_string())),
                }
            }
            Method::SingleCommand | Method::MultipleUpdates => {
                let (model, stats) = baseline_mapping(
                    &self.zc,
                    &self.observers,
                    self.cfg.m,
                    self.cfg.arena,
                    self.cfg.lp.epsilon,
                );
                self.meter.add_search(&stats);
                match model {
                    Ok(model) => Ok(Some(model)),
                    Err(SearchError::NoValidModel) => Ok(None),
                    Err(e) => Err(EpisodeError::Numerical(e.to_string())),
                }
            }
        }
    }

    /// Build a model, re-observing and retrying on soft failures until the
    /// shared retry budget runs out.
    fn mapping_with_retries(&mut self) -> Result<Option<WorldModel<EntityId>>, EpisodeError> {
        loop {
            self.observe_full();
            match self.try_mapping()? {
                Some(model) => return Ok(Some(model)),
                None => {
                    if self.retries_left == 0 {
                        return Ok(None);
                    }
                    self.retries_left -= 1;
                }
            }
        }
    }

    fn release(&mut self, model: &WorldModel<EntityId>) -> Result<ParticleSet, EpisodeError> {
        let release_cfg = ReleaseConfig {
            count: self.cfg.particle_count,
            position_spread: self.cfg.filter.position_spread_cm,
            heading_spread: self.cfg.heading_spread(),
            m: self.cfg.m,
        };
        self.meter.add(self.cfg.particle_count as u64 * C_RELEASE);
        release_particles(model, &self.observer_ids, &release_cfg, &mut self.filter_rng)
            .map_err(|e| EpisodeError::Setup(e.to_string()))
    }
}

/// Run one episode. Soft failures (no model, weight collapse, timeout) are
/// scored in the result; hard errors abort.
pub fn run_episode(
    cfg: &ScenarioConfig,
    seed: u64,
    opts: EpisodeOptions<'_>,
) -> Result<EpisodeResult, EpisodeError> {
    cfg.validate()?;
    let wall_start = opts.measure_wall.then(Instant::now);

    let mut state = WorldState::from_config(cfg);
    if let Some(poses) = opts.poses {
        state = state.with_poses(poses);
    }

    let observer_ids = cfg.observer_ids();
    let observers: BTreeMap<EntityId, Pose> =
        observer_ids.iter().map(|&id| (id, state.pose(id))).collect();
    let goal_region = region_of(state.goal, &observers, cfg.m).ok();
    if cfg.arrival == ArrivalMode::Region && goal_region.is_none() {
        return Err(EpisodeError::Setup(
            "goal region is undefined: goal coincides with an observer".into(),
        ));
    }

    let mut ep = Episode {
        cfg,
        state,
        observer_ids,
        observers,
        goal_region,
        zc: ObservationSet::new(),
        motion_rng: seeded_rng(seed, streams::MOTION),
        perception_rng: seeded_rng(seed, streams::PERCEPTION),
        filter_rng: seeded_rng(seed, streams::FILTER),
        meter: CostMeter::new(),
        retries_left: cfg.filter.retry_cap,
        trace: opts.trace,
    };

    let mut instructions: u64 = 0;
    let end = run_loop(&mut ep, &mut instructions)?;

    let denominator = instructions.max(1) as f64;
    Ok(EpisodeResult {
        success: matches!(end, End::Success),
        instructions,
        proc_ms_per_instruction: ep.meter.ms() / denominator,
        path_cm: ep.state.path_length,
        sim_time_s: ep.state.time,
        total_ops: ep.meter.ops,
        wall_ms_per_instruction: wall_start
            .map(|s| s.elapsed().as_secs_f64() * 1e3 / denominator),
        failure: match end {
            End::Success => None,
            End::Fail(reason) => Some(reason),
        },
    })
}

fn run_loop(ep: &mut Episode, instructions: &mut u64) -> Result<End, EpisodeError> {
    // Initial mapping, Alg. 2 "accomplished only one time per execution".
    let Some(model) = ep.mapping_with_retries()? else {
        return Ok(End::Fail(FailureReason::ModelFail));
    };

    let map = ep.cfg.lp.command_map;
    let mut controller = match ep.cfg.method {
        Method::SingleCommand => {
            ep.meter.add(C_SECTOR + C_MAP);
            Controller::Single { command: command_from_model(&model, map), issued: false }
        }
        Method::MultipleUpdates => {
            let last_sig = ep.signature_from_zc();
            Controller::Multiple { model, last_sig }
        }
        Method::Qpf => {
            let particles = ep.release(&model)?;
            let last_sig = ep.signature_from_zc();
            Controller::Qpf { particles, last_sig }
        }
        Method::Pfqc => {
            let particles = ep.release(&model)?;
            Controller::Pfqc { particles, last_update_s: ep.state.time }
        }
    };

    loop {
        if ep.arrived() {
            return Ok(End::Success);
        }
        if ep.timed_out() {
            return Ok(End::Fail(FailureReason::Timeout));
        }

        // Choose.
        let cmd = match &controller {
            Controller::Single { command, issued } => {
                if *issued {
                    // The single-command stop condition never fires, so a
                    // second visit only happens on a degenerate layout.
                    Command::MoveForward
                } else {
                    *command
                }
            }
            Controller::Multiple { model, .. } => {
                ep.meter.add(C_SECTOR + C_MAP);
                command_from_model(model, map)
            }
            Controller::Qpf { particles, .. } | Controller::Pfqc { particles, .. } => {
                ep.meter.add(particles.guided.len() as u64 * (C_SECTOR + C_MAP));
                choose_action(particles, ep.cfg.m, map)
            }
        };
        if let Controller::Single { issued, .. } = &mut controller {
            *issued = true;
        }
        if cmd != Command::Stop {
            *instructions += 1;
        }

        // Predict the commanded motion on the particle population.
        if cmd != Command::Stop {
            match &mut controller {
                Controller::Qpf { particles, .. } => {
                    let sigma = ep.cfg.rotation_sigma();
                    let step = ep.cfg.filter.qpf_step_cm;
                    let max_steps = ep.cfg.qpf_max_steps();
                    let jitter = ep.cfg.filter.qpf_jitter_cm;
                    let (guided, observers) = (&mut particles.guided, &particles.observers);
                    for p in guided {
                        predict_rotate(p, cmd, sigma, &mut ep.filter_rng);
                        qpf_predict_translate(
                            p,
                            observers,
                            ep.cfg.m,
                            step,
                            max_steps,
                            jitter,
                            &mut ep.filter_rng,
                        );
                    }
                }
                Controller::Pfqc { particles, .. } => {
                    let sigma = ep.cfg.rotation_sigma();
                    let tau = ep.cfg.tau_s.unwrap_or(0.0);
                    let rotation_s = cmd
                        .nominal_rotation()
                        .map(|r| r.abs() / ep.cfg.speeds.rotation_rad_s)
                        .unwrap_or(0.0);
                    let elapsed = (tau - rotation_s).max(0.0);
                    let speed = ep.cfg.speeds.translation_cm_s;
                    let sigma_dist = ep.cfg.filter.pfqc_sigma_dist_cm;
                    for p in &mut particles.guided {
                        predict_rotate(p, cmd, sigma, &mut ep.filter_rng);
                        pfqc_predict_translate(p, elapsed, speed, sigma_dist, &mut ep.filter_rng);
                    }
                }
                _ => {}
            }
        }

        ep.state.submit_command(cmd, &mut ep.motion_rng);
        ep.trace(TraceEventKind::Command, Some(cmd), Some(&controller));

        // Move until the method's stop condition (rotation in progress
        // defers every stop check). A changed signature must hold for
        // `stop_confirm_ticks` consecutive ticks so that one noisy flicker
        // near a border does not end the segment.
        let confirm = ep.cfg.filter.stop_confirm_ticks.max(1);
        let mut pending: Option<(RegionSignature, u32)> = None;
        loop {
            ep.state.tick();
            ep.trace(TraceEventKind::Tick, None, None);
            if ep.arrived() {
                return Ok(End::Success);
            }
            if ep.timed_out() {
                return Ok(End::Fail(FailureReason::Timeout));
            }
            if ep.state.rotating() {
                continue;
            }
            let stop = match &controller {
                Controller::Single { .. } => false,
                Controller::Multiple { last_sig, .. } | Controller::Qpf { last_sig, .. } => {
                    let sig = ep.perceived_signature();
                    if sig == *last_sig {
                        pending = None;
                        false
                    } else {
                        let run = match &mut pending {
                            Some((s, n)) if *s == sig => {
                                *n += 1;
                                *n
                            }
                            _ => {
                                pending = Some((sig, 1));
                                1
                            }
                        };
                        run >= confirm
                    }
                }
                Controller::Pfqc { last_update_s, .. } => {
                    pfqc_stop(ep.state.time, *last_update_s, ep.cfg.tau_s.unwrap_or(f64::MAX))
                }
            };
            if stop {
                break;
            }
        }

        // Collect: only the guided agent has moved.
        ep.refresh_guided();

        // Update.
        match &mut controller {
            Controller::Single { .. } => {}
            Controller::Multiple { model, last_sig } => {
                let fresh = loop {
                    match ep.try_mapping()? {
                        Some(model) => break model,
                        None => {
                            if ep.retries_left == 0 {
                                return Ok(End::Fail(FailureReason::ModelFail));
                            }
                            ep.retries_left -= 1;
                            ep.observe_full();
                        }
                    }
                };
                *model = fresh;
                ep.meter.add(ep.observer_ids.len() as u64 * C_SECTOR);
                *last_sig = ep.signature_from_zc();
            }
            Controller::Qpf { particles, last_sig } => {
                let (verdict, stats) = qpf_consistent(
                    &ep.zc,
                    &ep.observers,
                    ep.cfg.m,
                    ep.cfg.arena,
                    ep.cfg.lp.epsilon,
                );
                ep.meter.add_search(&stats);
                let consistent = verdict.map_err(|e| EpisodeError::Numerical(e.to_string()))?;

                let mut degenerate = false;
                if consistent {
                    let observed = ep.signature_from_zc();
                    let n = particles.guided.len() as u64;
                    let obs_count = ep.observer_ids.len() as u64;
                    ep.meter.add(obs_count * C_SECTOR + n * (obs_count * C_SECTOR + C_EXP));
                    let (guided, observers) = (&mut particles.guided, &particles.observers);
                    qpf_weigh(guided, &observed, observers, ep.cfg.m, ep.cfg.filter.signature_metric);
                    ep.meter.add(n * C_RESAMPLE);
                    match resample(&particles.guided, ep.cfg.filter.resampling, &mut ep.filter_rng)
                    {
                        Ok(fresh) => {
                            particles.guided = fresh;
                            *last_sig = observed;
                        }
                        Err(FilterError::DegenerateWeights) => degenerate = true,
                        Err(e) => return Err(EpisodeError::Setup(e.to_string())),
                    }
                }

                if !consistent || degenerate {
                    // Reinitialize: fresh observations, fresh model, fresh
                    // population, on the shared retry budget.
                    if ep.retries_left == 0 {
                        return Ok(End::Fail(if degenerate {
                            FailureReason::Degenerate
                        } else {
                            FailureReason::ModelFail
                        }));
                    }
                    ep.retries_left -= 1;
                    let Some(model) = ep.mapping_with_retries()? else {
                        return Ok(End::Fail(FailureReason::ModelFail));
                    };
                    *particles = ep.release(&model)?;
                    *last_sig = ep.signature_from_zc();
                }
            }
            Controller::Pfqc { particles, last_update_s } => {
                let n = particles.guided.len() as u64;
                let obs_count = ep.observer_ids.len() as u64;
                ep.meter.add(obs_count * C_RAY + C_SOLVE2 + n * (C_DIST + C_EXP));
                let sigma = ep.cfg.filter.pfqc_sigma_update_cm;
                match pfqc_weigh(&mut particles.guided, &ep.zc, &ep.observers, sigma) {
                    Ok(_fix) => {
                        ep.meter.add(n * C_RESAMPLE);
                        match resample(
                            &particles.guided,
                            ep.cfg.filter.resampling,
                            &mut ep.filter_rng,
                        ) {
                            Ok(fresh) => particles.guided = fresh,
                            Err(FilterError::DegenerateWeights) => {
                                if ep.retries_left == 0 {
                                    return Ok(End::Fail(FailureReason::Degenerate));
                                }
                                ep.retries_left -= 1;
                                let Some(model) = ep.mapping_with_retries()? else {
                                    return Ok(End::Fail(FailureReason::ModelFail));
                                };
                                *particles = ep.release(&model)?;
                            }
                            Err(e) => return Err(EpisodeError::Setup(e.to_string())),
                        }
                    }
                    // Ill-conditioned fix: keep the predicted population and
                    // try again after the next segment.
                    Err(_) => {}
                }
                *last_update_s = ep.state.time;
            }
        }
        ep.trace(TraceEventKind::Update, None, Some(&controller));
    }
}
