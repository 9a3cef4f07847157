//! The coordinator's observation records.
//!
//! Each observer contributes one measurement per target: a sector index for
//! the qualitative methods or a relative bearing for the coordinate filter.
//! Tuples carry the observer's own heading. Re-inserting a measurement for
//! the same (observer, target) pair replaces the previous one, which is how
//! fresh guided-agent readings are folded in during navigation.

use std::collections::BTreeMap;

use crate::angle::Angle;
use crate::entity::EntityId;
use crate::sectors::SectorRelation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// Quantized egocentric direction.
    Sector(u32),
    /// Noisy egocentric direction, relative to the observer's heading.
    Bearing(Angle),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationTuple {
    pub observer: EntityId,
    pub target: EntityId,
    pub measurement: Measurement,
    pub observer_heading: Angle,
}

impl ObservationTuple {
    pub fn sector(&self) -> Option<u32> {
        match self.measurement {
            Measurement::Sector(s) => Some(s),
            Measurement::Bearing(_) => None,
        }
    }

    pub fn bearing(&self) -> Option<Angle> {
        match self.measurement {
            Measurement::Bearing(b) => Some(b),
            Measurement::Sector(_) => None,
        }
    }
}

/// The coordinator's collected measurements, at most one per
/// (observer, target) pair, plus the guided agent's self-reported heading
/// when the scenario declares it known.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    tuples: BTreeMap<(EntityId, EntityId), ObservationTuple>,
    guided_heading: Option<Angle>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace the measurement for (observer, target).
    pub fn insert(&mut self, tuple: ObservationTuple) {
        debug_assert_ne!(tuple.observer, tuple.target);
        self.tuples.insert((tuple.observer, tuple.target), tuple);
    }

    pub fn set_guided_heading(&mut self, heading: Option<Angle>) {
        self.guided_heading = heading;
    }

    pub fn guided_heading(&self) -> Option<Angle> {
        self.guided_heading
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Tuples in deterministic (observer, target) order.
    pub fn tuples(&self) -> impl Iterator<Item = &ObservationTuple> {
        self.tuples.values()
    }

    pub fn get(&self, observer: EntityId, target: EntityId) -> Option<&ObservationTuple> {
        self.tuples.get(&(observer, target))
    }

    /// Sector relations carried by the set, in deterministic order.
    pub fn sector_relations(&self) -> Vec<SectorRelation<EntityId>> {
        self.tuples()
            .filter_map(|t| t.sector().map(|s| SectorRelation::new(t.observer, s, t.target)))
            .collect()
    }

    /// Every observer's heading as recorded in its tuples.
    pub fn observer_headings(&self) -> BTreeMap<EntityId, Angle> {
        self.tuples().map(|t| (t.observer, t.observer_heading)).collect()
    }

    /// Sector measurements of one target, keyed by observer.
    pub fn sectors_of_target(&self, target: EntityId) -> BTreeMap<EntityId, u32> {
        self.tuples()
            .filter(|t| t.target == target)
            .filter_map(|t| t.sector().map(|s| (t.observer, s)))
            .collect()
    }

    /// Bearing measurements of one target, keyed by observer.
    pub fn bearings_of_target(&self, target: EntityId) -> BTreeMap<EntityId, Angle> {
        self.tuples()
            .filter(|t| t.target == target)
            .filter_map(|t| t.bearing().map(|b| (t.observer, b)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d).unwrap()
    }

    #[test]
    fn duplicate_insertion_replaces() {
        let mut set = ObservationSet::new();
        let mut t = ObservationTuple {
            observer: EntityId::Coordinator,
            target: EntityId::Guided,
            measurement: Measurement::Sector(3),
            observer_heading: deg(0.0),
        };
        set.insert(t);
        t.measurement = Measurement::Sector(5);
        set.insert(t);
        assert_eq!(set.len(), 1);
        assert_eq!(set.get(EntityId::Coordinator, EntityId::Guided).unwrap().sector(), Some(5));
    }

    #[test]
    fn relations_come_out_in_key_order() {
        let mut set = ObservationSet::new();
        for (obs, sector) in [(EntityId::Observer(2), 4), (EntityId::Coordinator, 1)] {
            set.insert(ObservationTuple {
                observer: obs,
                target: EntityId::Guided,
                measurement: Measurement::Sector(sector),
                observer_heading: deg(0.0),
            });
        }
        let rels = set.sector_relations();
        assert_eq!(rels[0].source, EntityId::Coordinator);
        assert_eq!(rels[1].source, EntityId::Observer(2));
        assert_eq!(rels[0].sector, 1);
    }

    #[test]
    fn target_projections_filter_by_kind() {
        let mut set = ObservationSet::new();
        set.insert(ObservationTuple {
            observer: EntityId::Coordinator,
            target: EntityId::Guided,
            measurement: Measurement::Bearing(deg(45.0)),
            observer_heading: deg(90.0),
        });
        assert!(set.sectors_of_target(EntityId::Guided).is_empty());
        let bearings = set.bearings_of_target(EntityId::Guided);
        assert_eq!(bearings[&EntityId::Coordinator], deg(45.0));
    }
}
