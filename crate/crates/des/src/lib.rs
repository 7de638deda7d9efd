//! A three-phase discrete-event simulation kernel.
//!
//! Entities move between four lists according to their lifecycle state:
//!
//! | state              | list                                   |
//! |--------------------|----------------------------------------|
//! | `Ready` / `Active` | current event list (CEL)               |
//! | `TimeDelayed`      | future event list (FEL), a binary heap |
//! | `ConditionDelayed` | delay list (DL)                        |
//! | `Dormant`          | user-managed list (UML)                |
//!
//! A run alternates the clock update phase, which pulls every event sharing
//! the earliest due time from the FEL into the CEL, with the entity movement
//! phase, which activates each CEL entity until it blocks and then re-tests
//! the delay list guards until no guard fires. Simultaneous events are
//! released in insertion order.

pub mod stress;
mod time;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::error::Error as StdError;
use std::fmt;

use thiserror::Error;

pub use time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(u64);

impl EntityId {
    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Names a condition that a model can evaluate; entities wait on it in the DL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityState {
    Ready,
    Active,
    TimeDelayed,
    ConditionDelayed,
    Dormant,
}

/// A FEL entry. Ordered by `(due, sequence)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventHandle {
    pub due: SimTime,
    pub sequence: u64,
    pub entity: EntityId,
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("time value {0} is negative or not finite")]
    InvalidTime(f64),
    #[error("due time {due} is before the clock {clock}")]
    PastTime { due: SimTime, clock: SimTime },
    #[error("entity {0} is already time-delayed")]
    DuplicateSchedule(EntityId),
    #[error("the future event list is empty")]
    EmptyCalendar,
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("entity {entity} is {actual:?}, operation requires {expected}")]
    InvalidState {
        entity: EntityId,
        actual: EntityState,
        expected: &'static str,
    },
    #[error("handler for entity {0} returned without blocking or terminating it")]
    Unblocked(EntityId),
    #[error("handler failed for entity {entity}: {source}")]
    HandlerFailure {
        entity: EntityId,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

/// Model callbacks invoked by the kernel.
pub trait Model {
    type Payload;
    type Error: StdError + Send + Sync + 'static;

    /// Process `entity`, which is `Active`. Before returning the handler must
    /// block the entity (`schedule`, `delay_until`, `park`) or `terminate` it.
    fn activate(
        &mut self,
        kernel: &mut Kernel<Self::Payload>,
        entity: EntityId,
    ) -> Result<(), Self::Error>;

    /// Guard predicate for condition-delayed entities.
    fn condition_holds(&self, _kernel: &Kernel<Self::Payload>, _condition: ConditionId) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ListCounts {
    pub current: usize,
    pub future: usize,
    pub delayed: usize,
    pub dormant: usize,
}

impl ListCounts {
    pub fn total(&self) -> usize {
        self.current + self.future + self.delayed + self.dormant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub final_clock: SimTime,
    pub events_executed: u64,
    pub remaining: ListCounts,
}

/// One activation, recorded when tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub clock: SimTime,
    pub entity: EntityId,
}

struct Slot<P> {
    state: EntityState,
    payload: P,
}

pub struct Kernel<P> {
    clock: SimTime,
    entities: HashMap<EntityId, Slot<P>>,
    fel: BinaryHeap<Reverse<EventHandle>>,
    cel: VecDeque<EntityId>,
    active: Option<EntityId>,
    dl: Vec<(EntityId, ConditionId)>,
    uml: BTreeSet<EntityId>,
    next_id: u64,
    next_sequence: u64,
    created: u64,
    terminated: u64,
    executed: u64,
    last_dequeued: SimTime,
    trace: Option<Vec<TraceEntry>>,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            clock: SimTime::ZERO,
            entities: HashMap::new(),
            fel: BinaryHeap::new(),
            cel: VecDeque::new(),
            active: None,
            dl: Vec::new(),
            uml: BTreeSet::new(),
            next_id: 0,
            next_sequence: 0,
            created: 0,
            terminated: 0,
            executed: 0,
            last_dequeued: SimTime::ZERO,
            trace: None,
        }
    }

    /// Record every activation from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn events_executed(&self) -> u64 {
        self.executed
    }

    pub fn created(&self) -> u64 {
        self.created
    }

    pub fn terminated(&self) -> u64 {
        self.terminated
    }

    pub fn state(&self, entity: EntityId) -> Option<EntityState> {
        self.entities.get(&entity).map(|s| s.state)
    }

    pub fn payload(&self, entity: EntityId) -> Option<&P> {
        self.entities.get(&entity).map(|s| &s.payload)
    }

    pub fn payload_mut(&mut self, entity: EntityId) -> Option<&mut P> {
        self.entities.get_mut(&entity).map(|s| &mut s.payload)
    }

    pub fn list_counts(&self) -> ListCounts {
        ListCounts {
            current: self.cel.len() + usize::from(self.active.is_some()),
            future: self.fel.len(),
            delayed: self.dl.len(),
            dormant: self.uml.len(),
        }
    }

    pub fn peek_next_due(&self) -> Option<SimTime> {
        self.fel.peek().map(|Reverse(ev)| ev.due)
    }

    /// Create a new entity. It starts `Dormant` in the user-managed list.
    pub fn create(&mut self, payload: P) -> EntityId {
        let id = EntityId(self.next_id);
        self.next_id += 1;
        self.created += 1;
        self.entities.insert(
            id,
            Slot {
                state: EntityState::Dormant,
                payload,
            },
        );
        self.uml.insert(id);
        id
    }

    /// Create an entity and schedule it at `due`.
    pub fn spawn(&mut self, payload: P, due: SimTime) -> Result<EventHandle, KernelError> {
        let id = self.create(payload);
        self.schedule(id, due)
    }

    /// Time-delay `entity` until `due`. The entity must be `Active` or `Dormant`.
    pub fn schedule(&mut self, entity: EntityId, due: SimTime) -> Result<EventHandle, KernelError> {
        let state = self.state(entity).ok_or(KernelError::UnknownEntity(entity))?;
        if due < self.clock {
            return Err(KernelError::PastTime {
                due,
                clock: self.clock,
            });
        }
        match state {
            EntityState::TimeDelayed => return Err(KernelError::DuplicateSchedule(entity)),
            EntityState::Active => self.release_active(entity),
            EntityState::Dormant => {
                self.uml.remove(&entity);
            }
            actual => {
                return Err(KernelError::InvalidState {
                    entity,
                    actual,
                    expected: "Active or Dormant",
                })
            }
        }
        self.set_state(entity, EntityState::TimeDelayed);
        let handle = EventHandle {
            due,
            sequence: self.next_sequence,
            entity,
        };
        self.next_sequence += 1;
        self.fel.push(Reverse(handle));
        Ok(handle)
    }

    /// Condition-delay the active `entity` until `condition` holds.
    pub fn delay_until(&mut self, entity: EntityId, condition: ConditionId) -> Result<(), KernelError> {
        self.expect_state(entity, EntityState::Active, "Active")?;
        self.release_active(entity);
        self.set_state(entity, EntityState::ConditionDelayed);
        self.dl.push((entity, condition));
        Ok(())
    }

    /// Move the active `entity` to the user-managed list.
    pub fn park(&mut self, entity: EntityId) -> Result<(), KernelError> {
        self.expect_state(entity, EntityState::Active, "Active")?;
        self.release_active(entity);
        self.set_state(entity, EntityState::Dormant);
        self.uml.insert(entity);
        Ok(())
    }

    /// Move a dormant `entity` to the end of the CEL at the current clock.
    pub fn unpark(&mut self, entity: EntityId) -> Result<(), KernelError> {
        self.expect_state(entity, EntityState::Dormant, "Dormant")?;
        self.uml.remove(&entity);
        self.set_state(entity, EntityState::Ready);
        self.cel.push_back(entity);
        Ok(())
    }

    /// Remove an `Active` or `Dormant` entity, returning its payload.
    pub fn terminate(&mut self, entity: EntityId) -> Result<P, KernelError> {
        let state = self.state(entity).ok_or(KernelError::UnknownEntity(entity))?;
        match state {
            EntityState::Active => self.release_active(entity),
            EntityState::Dormant => {
                self.uml.remove(&entity);
            }
            actual => {
                return Err(KernelError::InvalidState {
                    entity,
                    actual,
                    expected: "Active or Dormant",
                })
            }
        }
        self.terminated += 1;
        Ok(self.entities.remove(&entity).expect("state checked").payload)
    }

    /// Advance the clock to the earliest due time and move every event due
    /// at that instant into the CEL, in sequence order.
    pub fn clock_update_phase(&mut self) -> Result<SimTime, KernelError> {
        let Reverse(first) = self.fel.pop().ok_or(KernelError::EmptyCalendar)?;
        assert!(
            first.due >= self.last_dequeued && first.due >= self.clock,
            "FEL dequeued {} after {}",
            first.due,
            self.last_dequeued
        );
        self.last_dequeued = first.due;
        self.clock = first.due;
        self.make_ready(first.entity);
        while let Some(Reverse(next)) = self.fel.peek() {
            if next.due != self.clock {
                break;
            }
            let Reverse(next) = self.fel.pop().expect("peeked");
            self.make_ready(next.entity);
        }
        Ok(self.clock)
    }

    /// Activate every CEL entity, then re-test DL guards until none fire.
    /// Returns the number of activations.
    pub fn entity_movement_phase<M>(&mut self, model: &mut M) -> Result<usize, KernelError>
    where
        M: Model<Payload = P>,
    {
        let mut processed = 0;
        loop {
            while let Some(entity) = self.cel.pop_front() {
                self.set_state(entity, EntityState::Active);
                self.active = Some(entity);
                if let Some(trace) = self.trace.as_mut() {
                    trace.push(TraceEntry {
                        clock: self.clock,
                        entity,
                    });
                }
                model
                    .activate(self, entity)
                    .map_err(|e| KernelError::HandlerFailure {
                        entity,
                        source: Box::new(e),
                    })?;
                if self.active == Some(entity) {
                    return Err(KernelError::Unblocked(entity));
                }
                processed += 1;
                self.executed += 1;
            }
            if !self.release_satisfied_guards(model) {
                break;
            }
        }
        Ok(processed)
    }

    /// Run until the FEL is empty or the next event lies beyond `until`.
    pub fn run<M>(&mut self, until: SimTime, model: &mut M) -> Result<RunReport, KernelError>
    where
        M: Model<Payload = P>,
    {
        // entities made ready during initialisation run at the start clock
        if !self.cel.is_empty() {
            self.entity_movement_phase(model)?;
        }
        while let Some(due) = self.peek_next_due() {
            if due > until {
                break;
            }
            self.clock_update_phase()?;
            self.entity_movement_phase(model)?;
        }
        Ok(RunReport {
            final_clock: self.clock,
            events_executed: self.executed,
            remaining: self.list_counts(),
        })
    }

    /// Check that every entity sits in exactly the list its state names and
    /// that no entity has been lost.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut seen: HashMap<EntityId, EntityState> = HashMap::new();
        let mut place = |id: EntityId, st: EntityState| -> Result<(), String> {
            if seen.insert(id, st).is_some() {
                return Err(format!("entity {id} appears in more than one list slot"));
            }
            Ok(())
        };
        for id in self.cel.iter().copied() {
            place(id, EntityState::Ready)?;
        }
        if let Some(id) = self.active {
            place(id, EntityState::Active)?;
        }
        for Reverse(ev) in self.fel.iter() {
            place(ev.entity, EntityState::TimeDelayed)?;
        }
        for (id, _) in self.dl.iter() {
            place(*id, EntityState::ConditionDelayed)?;
        }
        for id in self.uml.iter().copied() {
            place(id, EntityState::Dormant)?;
        }
        if seen.len() != self.entities.len() {
            return Err(format!(
                "{} entities alive but {} listed",
                self.entities.len(),
                seen.len()
            ));
        }
        for (id, slot) in &self.entities {
            match seen.get(id) {
                Some(st) if *st == slot.state => {}
                Some(st) => {
                    return Err(format!(
                        "entity {id} is {:?} but listed as {:?}",
                        slot.state, st
                    ))
                }
                None => return Err(format!("entity {id} is in no list")),
            }
        }
        let live = self.created - self.terminated;
        if live != self.list_counts().total() as u64 {
            return Err(format!(
                "created {} - terminated {} != {} listed",
                self.created,
                self.terminated,
                self.list_counts().total()
            ));
        }
        Ok(())
    }

    fn release_satisfied_guards<M>(&mut self, model: &M) -> bool
    where
        M: Model<Payload = P>,
    {
        let fired: Vec<bool> = self
            .dl
            .iter()
            .map(|(_, cond)| model.condition_holds(self, *cond))
            .collect();
        if !fired.contains(&true) {
            return false;
        }
        let mut flags = fired.into_iter();
        let mut released = Vec::new();
        self.dl.retain(|(id, _)| {
            let hit = flags.next().unwrap_or(false);
            if hit {
                released.push(*id);
            }
            !hit
        });
        for id in released {
            self.set_state(id, EntityState::Ready);
            self.cel.push_back(id);
        }
        true
    }

    fn make_ready(&mut self, entity: EntityId) {
        self.set_state(entity, EntityState::Ready);
        self.cel.push_back(entity);
    }

    fn release_active(&mut self, entity: EntityId) {
        if self.active == Some(entity) {
            self.active = None;
        }
    }

    fn set_state(&mut self, entity: EntityId, state: EntityState) {
        if let Some(slot) = self.entities.get_mut(&entity) {
            slot.state = state;
        }
    }

    fn expect_state(
        &self,
        entity: EntityId,
        wanted: EntityState,
        expected: &'static str,
    ) -> Result<(), KernelError> {
        match self.state(entity) {
            None => Err(KernelError::UnknownEntity(entity)),
            Some(s) if s == wanted => Ok(()),
            Some(actual) => Err(KernelError::InvalidState {
                entity,
                actual,
                expected,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: f64) -> SimTime {
        SimTime::new(h).unwrap()
    }

    #[derive(Debug, thiserror::Error)]
    #[error("boom")]
    struct Boom;

    /// Terminates every entity it sees and records the order.
    #[derive(Default)]
    struct Recorder {
        seen: Vec<(f64, EntityId)>,
    }

    impl Model for Recorder {
        type Payload = ();
        type Error = Boom;
        fn activate(&mut self, k: &mut Kernel<()>, e: EntityId) -> Result<(), Boom> {
            self.seen.push((k.clock().hours(), e));
            k.terminate(e).unwrap();
            Ok(())
        }
    }

    #[test]
    fn zero_delay_fires_in_next_update() {
        let mut k = Kernel::new();
        let e1 = k.create(());
        k.schedule(e1, k.clock()).unwrap();
        assert_eq!(k.clock_update_phase().unwrap(), SimTime::ZERO);
        assert_eq!(k.state(e1), Some(EntityState::Ready));
    }

    #[test]
    fn earlier_due_dequeued_first() {
        let mut k = Kernel::new();
        let e1 = k.spawn((), t(5.0)).unwrap().entity;
        let e2 = k.spawn((), t(3.0)).unwrap().entity;
        assert_eq!(k.clock_update_phase().unwrap(), t(3.0));
        assert_eq!(k.cel.iter().copied().collect::<Vec<_>>(), vec![e2]);
        assert_eq!(k.list_counts().future, 1);
        assert_eq!(k.state(e1), Some(EntityState::TimeDelayed));
    }

    #[test]
    fn ties_release_in_insertion_order() {
        let mut k = Kernel::new();
        let e1 = k.spawn((), t(4.0)).unwrap().entity;
        let e2 = k.spawn((), t(4.0)).unwrap().entity;
        assert_eq!(k.clock_update_phase().unwrap(), t(4.0));
        assert_eq!(k.cel.iter().copied().collect::<Vec<_>>(), vec![e1, e2]);
        assert!(k.fel.is_empty());
    }

    #[test]
    fn empty_calendar_is_an_error() {
        let mut k: Kernel<()> = Kernel::new();
        assert!(matches!(k.clock_update_phase(), Err(KernelError::EmptyCalendar)));
    }

    #[test]
    fn schedule_errors() {
        let mut k = Kernel::new();
        let e = k.spawn((), t(2.0)).unwrap().entity;
        assert!(matches!(k.schedule(e, t(3.0)), Err(KernelError::DuplicateSchedule(_))));
        k.clock_update_phase().unwrap();
        let d = k.create(());
        assert!(matches!(k.schedule(d, t(1.0)), Err(KernelError::PastTime { .. })));
        // Ready entities cannot be scheduled directly
        assert!(matches!(k.schedule(e, t(3.0)), Err(KernelError::InvalidState { .. })));
    }

    #[test]
    fn single_terminating_entity() {
        let mut k = Kernel::new();
        let e1 = k.spawn((), t(1.0)).unwrap().entity;
        k.clock_update_phase().unwrap();
        let mut m = Recorder::default();
        assert_eq!(k.entity_movement_phase(&mut m).unwrap(), 1);
        assert_eq!(k.state(e1), None);
        assert_eq!(k.list_counts().total(), 0);
        k.check_consistency().unwrap();
    }

    #[test]
    fn empty_cel_returns_zero() {
        let mut k: Kernel<()> = Kernel::new();
        assert_eq!(k.entity_movement_phase(&mut Recorder::default()).unwrap(), 0);
    }

    /// Entity payload true means "release condition 0 when activated".
    struct Gate {
        open: bool,
        order: Vec<EntityId>,
    }

    impl Model for Gate {
        type Payload = bool;
        type Error = Boom;
        fn activate(&mut self, k: &mut Kernel<bool>, e: EntityId) -> Result<(), Boom> {
            self.order.push(e);
            if *k.payload(e).unwrap() {
                self.open = true;
            }
            k.terminate(e).unwrap();
            Ok(())
        }
        fn condition_holds(&self, _k: &Kernel<bool>, c: ConditionId) -> bool {
            c == ConditionId(0) && self.open
        }
    }

    /// Put a fresh entity into the DL by activating it once.
    fn condition_delayed(k: &mut Kernel<bool>, payload: bool) -> EntityId {
        let e = k.create(payload);
        k.uml.remove(&e);
        k.set_state(e, EntityState::Active);
        k.active = Some(e);
        k.delay_until(e, ConditionId(0)).unwrap();
        e
    }

    #[test]
    fn satisfied_guard_processed_with_empty_cel() {
        let mut k = Kernel::new();
        let e = condition_delayed(&mut k, false);
        let mut m = Gate {
            open: true,
            order: vec![],
        };
        assert_eq!(k.entity_movement_phase(&mut m).unwrap(), 1);
        assert_eq!(m.order, vec![e]);
        k.check_consistency().unwrap();
    }

    #[test]
    fn handler_signal_frees_waiting_entity_same_clock() {
        let mut k = Kernel::new();
        let waiting = condition_delayed(&mut k, false);
        let e1 = k.spawn(true, t(2.0)).unwrap().entity;
        k.clock_update_phase().unwrap();
        let mut m = Gate {
            open: false,
            order: vec![],
        };
        assert_eq!(k.entity_movement_phase(&mut m).unwrap(), 2);
        assert_eq!(m.order, vec![e1, waiting]);
        assert_eq!(k.clock(), t(2.0));
    }

    #[test]
    fn state_checks_for_delay_park_unpark() {
        let mut k: Kernel<()> = Kernel::new();
        let e = k.create(());
        assert!(matches!(k.delay_until(e, ConditionId(1)), Err(KernelError::InvalidState { .. })));
        assert!(matches!(k.park(e), Err(KernelError::InvalidState { .. })));
        k.unpark(e).unwrap();
        assert_eq!(k.state(e), Some(EntityState::Ready));
        assert!(matches!(k.unpark(e), Err(KernelError::InvalidState { .. })));
        assert!(matches!(k.terminate(EntityId(99)), Err(KernelError::UnknownEntity(_))));
        k.check_consistency().unwrap();
    }

    struct Lazy;
    impl Model for Lazy {
        type Payload = ();
        type Error = Boom;
        fn activate(&mut self, _k: &mut Kernel<()>, _e: EntityId) -> Result<(), Boom> {
            Ok(())
        }
    }

    struct Failing;
    impl Model for Failing {
        type Payload = ();
        type Error = Boom;
        fn activate(&mut self, _k: &mut Kernel<()>, _e: EntityId) -> Result<(), Boom> {
            Err(Boom)
        }
    }

    #[test]
    fn handler_must_block() {
        let mut k = Kernel::new();
        k.spawn((), t(1.0)).unwrap();
        k.clock_update_phase().unwrap();
        assert!(matches!(k.entity_movement_phase(&mut Lazy), Err(KernelError::Unblocked(_))));
    }

    #[test]
    fn handler_failure_names_entity() {
        let mut k = Kernel::new();
        let e = k.spawn((), t(1.0)).unwrap().entity;
        let err = k.run(t(5.0), &mut Failing).unwrap_err();
        match err {
            KernelError::HandlerFailure { entity, source } => {
                assert_eq!(entity, e);
                assert!(source.downcast_ref::<Boom>().is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn run_with_empty_fel() {
        let mut k: Kernel<()> = Kernel::new();
        let r = k.run(t(10.0), &mut Recorder::default()).unwrap();
        assert_eq!(r.final_clock, SimTime::ZERO);
        assert_eq!(r.events_executed, 0);
    }

    #[test]
    fn run_stops_before_horizon() {
        let mut k = Kernel::new();
        for h in [1.0, 2.0, 3.0] {
            k.spawn((), t(h)).unwrap();
        }
        let r = k.run(t(2.5), &mut Recorder::default()).unwrap();
        assert_eq!(r.events_executed, 2);
        assert_eq!(r.final_clock, t(2.0));
        assert_eq!(r.remaining.future, 1);
    }

    /// Reschedules itself one hour later until the clock reaches 3.
    struct Chain;
    impl Model for Chain {
        type Payload = ();
        type Error = Boom;
        fn activate(&mut self, k: &mut Kernel<()>, e: EntityId) -> Result<(), Boom> {
            if k.clock() < t(3.0) {
                let next = k.clock().after(1.0).unwrap();
                k.schedule(e, next).unwrap();
            } else {
                k.terminate(e).unwrap();
            }
            Ok(())
        }
    }

    #[test]
    fn run_follows_chain_of_reschedules() {
        let mut k = Kernel::new();
        k.spawn((), t(1.0)).unwrap();
        k.enable_trace();
        let r = k.run(t(10.0), &mut Chain).unwrap();
        assert_eq!(r.events_executed, 3);
        assert_eq!(r.final_clock, t(3.0));
        let clocks: Vec<f64> = k.trace().iter().map(|e| e.clock.hours()).collect();
        assert_eq!(clocks, vec![1.0, 2.0, 3.0]);
    }
}
