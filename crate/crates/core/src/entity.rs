//! Identities and poses of the spatial entities in a scenario.

use std::fmt;

use crate::angle::Angle;

/// Identity of one spatial entity. The coordinator is itself an observer;
/// additional observers are numbered from 1. The ordering of the variants is
/// the canonical entity order used everywhere determinism matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityId {
    Coordinator,
    Observer(u8),
    Guided,
    Goal,
}

impl EntityId {
    /// Observers are the entities that perceive and report directions:
    /// the coordinator plus the numbered observers.
    pub fn is_observer(self) -> bool {
        matches!(self, EntityId::Coordinator | EntityId::Observer(_))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Coordinator => write!(f, "coordinator"),
            EntityId::Observer(i) => write!(f, "observer{i}"),
            EntityId::Guided => write!(f, "guided"),
            EntityId::Goal => write!(f, "goal"),
        }
    }
}

/// Planar pose: position in centimetres plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: Angle,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: Angle) -> Pose {
        Pose { x, y, theta }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, point: (f64, f64)) -> f64 {
        ((self.x - point.0).powi(2) + (self.y - point.1).powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_puts_observers_before_guided_and_goal() {
        let mut ids = vec![
            EntityId::Goal,
            EntityId::Guided,
            EntityId::Observer(2),
            EntityId::Coordinator,
            EntityId::Observer(1),
        ];
        ids.sort();
        assert_eq!(
            ids,
            vec![
                EntityId::Coordinator,
                EntityId::Observer(1),
                EntityId::Observer(2),
                EntityId::Guided,
                EntityId::Goal,
            ]
        );
    }
}
