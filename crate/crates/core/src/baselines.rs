//! Particle-free reference methods: a single qualitative command issued from
//! one model build, and a rebuild-on-every-region-change variant. Both share
//! the sector calculus and the model search with the particle filters.

use std::collections::BTreeMap;

use crate::angle::Angle;
use crate::command::Command;
use crate::entity::{EntityId, Pose};
use crate::observation::ObservationSet;
use crate::scenario::{Arena, CommandMapKind};
use crate::sectors::{
    command_for_sector, sector_of, ModelSearch, SearchError, SearchStats, WorldModel,
};

/// The command steering the model's guided agent toward the model's goal:
/// the goal's sector in the guided frame run through the command map. When
/// the model collapses both onto one point the sector is undefined; moving
/// forward keeps the episode alive until the arrival check settles it.
pub fn command_from_model(model: &WorldModel<EntityId>, map: CommandMapKind) -> Command {
    let Some(guided) = model.pose(&EntityId::Guided) else {
        return Command::MoveForward;
    };
    let Some(&goal) = model.positions.get(&EntityId::Goal) else {
        return Command::MoveForward;
    };
    match sector_of(model.m, guided.position(), guided.theta, goal) {
        Ok(sector) => command_for_sector(model.m, sector, map),
        Err(_) => Command::MoveForward,
    }
}

/// Model construction for the reference methods. The coordinator knows its
/// own heading; the other observers' headings are treated as unknown and
/// enumerated. Observer positions are anchored (they localize themselves),
/// while the guided agent and goal are solved for. A reported guided heading
/// enters the model directly; without one the model assumes the first
/// orientation of the discretized set, 0 degrees.
pub fn baseline_mapping(
    zc: &ObservationSet,
    observer_poses: &BTreeMap<EntityId, Pose>,
    m: u32,
    arena: Arena,
    epsilon: f64,
) -> (Result<WorldModel<EntityId>, SearchError>, SearchStats) {
    let relations = zc.sector_relations();

    let mut known = BTreeMap::new();
    if let Some(coordinator) = observer_poses.get(&EntityId::Coordinator) {
        known.insert(EntityId::Coordinator, coordinator.theta);
    }
    known.insert(EntityId::Guided, zc.guided_heading().unwrap_or(Angle::ZERO));

    let unknown: Vec<EntityId> = observer_poses
        .keys()
        .copied()
        .filter(|&id| id != EntityId::Coordinator)
        .collect();

    let anchored: BTreeMap<EntityId, (f64, f64)> =
        observer_poses.iter().map(|(&id, p)| (id, p.position())).collect();

    let search = ModelSearch {
        m,
        arena,
        epsilon,
        relations: &relations,
        known_headings: known,
        unknown_headings: unknown,
        anchored,
        chebyshev: true,
    };
    search.run()
}
