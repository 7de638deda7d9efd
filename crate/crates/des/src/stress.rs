//! Randomized workload for exercising the kernel's list discipline.
//!
//! Entities reschedule themselves with random (often tied) delays, wait on
//! conditions, park and wake each other, and die and get replaced. After
//! every phase the driver checks the FEL order, the clock and the
//! state/list bookkeeping.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ConditionId, EntityId, Kernel, KernelError, Model, SimTime};

const CONDITIONS: u32 = 4;

#[derive(Debug, Clone)]
pub struct StressConfig {
    pub seed: u64,
    pub population: usize,
    pub target_events: u64,
    /// Run the full state/list check every this many phases (1 = every phase).
    pub full_check_every: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressReport {
    pub events: u64,
    pub phases: u64,
    pub created: u64,
    pub terminated: u64,
    /// `(clock, entity)` for every activation, in execution order.
    pub trace: Vec<(f64, u64)>,
    pub violations: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct StressError(String);

struct Churn {
    rng: ChaCha8Rng,
    flags: [bool; CONDITIONS as usize],
    dormant: BTreeSet<EntityId>,
    expected_due: HashMap<EntityId, SimTime>,
    violations: Vec<String>,
}

impl Churn {
    fn delay(&mut self) -> f64 {
        // small integer grid so that ties are frequent
        f64::from(self.rng.random_range(0..6u32)) * 0.5
    }

    fn reschedule(&mut self, k: &mut Kernel<()>, e: EntityId) -> Result<(), KernelError> {
        let due = k.clock().after(self.delay())?;
        k.schedule(e, due)?;
        self.expected_due.insert(e, due);
        Ok(())
    }

    fn step(&mut self, k: &mut Kernel<()>, e: EntityId) -> Result<(), KernelError> {
        if let Some(due) = self.expected_due.remove(&e) {
            if due != k.clock() {
                self.violations
                    .push(format!("{e} scheduled for {due} ran at {}", k.clock()));
            }
        }
        let roll = self.rng.random_range(0..100u32);
        match roll {
            0..=54 => self.reschedule(k, e),
            55..=64 => {
                let c = self.rng.random_range(0..CONDITIONS);
                k.delay_until(e, ConditionId(c))
            }
            65..=74 => {
                let c = self.rng.random_range(0..CONDITIONS) as usize;
                self.flags[c] = !self.flags[c];
                self.reschedule(k, e)
            }
            75..=79 => {
                k.park(e)?;
                self.dormant.insert(e);
                Ok(())
            }
            80..=89 => {
                if let Some(&sleeper) = self.dormant.iter().next() {
                    self.dormant.remove(&sleeper);
                    k.unpark(sleeper)?;
                }
                self.reschedule(k, e)
            }
            _ => {
                k.terminate(e)?;
                let due = k.clock().after(self.delay())?;
                let h = k.spawn((), due)?;
                self.expected_due.insert(h.entity, due);
                Ok(())
            }
        }
    }
}

impl Model for Churn {
    type Payload = ();
    type Error = StressError;

    fn activate(&mut self, k: &mut Kernel<()>, e: EntityId) -> Result<(), StressError> {
        self.step(k, e).map_err(|err| StressError(err.to_string()))
    }

    fn condition_holds(&self, _k: &Kernel<()>, c: ConditionId) -> bool {
        self.flags[c.0 as usize]
    }
}

/// Drive the workload phase by phase until `target_events` activations.
pub fn run_stress(cfg: &StressConfig) -> Result<StressReport, KernelError> {
    let mut kernel = Kernel::new();
    kernel.enable_trace();
    let mut model = Churn {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        flags: [false; CONDITIONS as usize],
        dormant: BTreeSet::new(),
        expected_due: HashMap::new(),
        violations: Vec::new(),
    };
    for _ in 0..cfg.population {
        let due = SimTime::new(model.delay())?;
        let h = kernel.spawn((), due)?;
        model.expected_due.insert(h.entity, due);
    }

    let mut violations = Vec::new();
    let mut phases = 0u64;
    let mut previous = SimTime::ZERO;
    let every = cfg.full_check_every.max(1);
    while kernel.events_executed() < cfg.target_events {
        if kernel.peek_next_due().is_none() {
            // everyone is waiting or parked; wake one so the run can continue
            match model.dormant.iter().next().copied() {
                Some(e) => {
                    model.dormant.remove(&e);
                    kernel.unpark(e)?;
                }
                None => {
                    model.flags = [true; CONDITIONS as usize];
                }
            }
            kernel.entity_movement_phase(&mut model)?;
            phases += 1;
            continue;
        }
        let clock = kernel.clock_update_phase()?;
        if clock < previous {
            violations.push(format!("clock went back from {previous} to {clock}"));
        }
        previous = clock;
        kernel.entity_movement_phase(&mut model)?;
        phases += 1;
        let counts = kernel.list_counts();
        if kernel.created() - kernel.terminated() != counts.total() as u64 {
            violations.push(format!("entity count mismatch at phase {phases}"));
        }
        if phases.is_multiple_of(every) {
            if let Err(msg) = kernel.check_consistency() {
                violations.push(format!("phase {phases}: {msg}"));
            }
        }
    }
    if let Err(msg) = kernel.check_consistency() {
        violations.push(format!("final: {msg}"));
    }
    violations.append(&mut model.violations);

    let trace = kernel
        .trace()
        .iter()
        .map(|t| (t.clock.hours(), t.entity.raw()))
        .collect();
    Ok(StressReport {
        events: kernel.events_executed(),
        phases,
        created: kernel.created(),
        terminated: kernel.terminated(),
        trace,
        violations,
    })
}
