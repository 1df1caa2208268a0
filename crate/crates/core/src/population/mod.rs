//! The fitness-ranked type population and its exact event-driven dynamics.
//!
//! With `n` types alive, a new type is born at rate `n * lambda` and, when
//! `n >= 2`, the type of smallest fitness dies at rate `n`. Fitnesses are
//! i.i.d. uniform on `[0, 1]`; only their ranks matter.

mod chain;
mod log;
mod sim;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Cap, Error, Result};

pub use chain::BirthDeathChain;
pub use log::{snapshot_counts, Counts, Event, EventKind, EventLog};
pub use sim::{simulate, SimConfig, Simulator, Trajectory};

pub type TypeId = u64;

pub const DEFAULT_MAX_POPULATION: u64 = 10_000_000;
pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

/// One type, from birth to (possibly) death.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeRecord {
    pub id: TypeId,
    pub fitness: f64,
    pub birth_time: f64,
    pub death_time: Option<f64>,
    pub parent_id: Option<TypeId>,
}

/// An alive type as kept in the population heap.
///
/// Ordered by fitness, ties broken by id, so the smaller id is the minimum
/// and dies first.
#[derive(Debug, Clone, Copy)]
pub struct AliveType {
    pub id: TypeId,
    pub fitness: f64,
    pub birth_time: f64,
}

impl AliveType {
    fn into_record(self, death_time: Option<f64>) -> TypeRecord {
        TypeRecord {
            id: self.id,
            fitness: self.fitness,
            birth_time: self.birth_time,
            death_time,
            parent_id: None,
        }
    }
}

impl PartialEq for AliveType {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for AliveType {}

impl PartialOrd for AliveType {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AliveType {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fitness
            .total_cmp(&other.fitness)
            .then(self.id.cmp(&other.id))
    }
}

/// Alive types plus the running counters of one trajectory.
///
/// The record holder (fittest type ever born) is tracked separately from the
/// min-heap. It is never the minimum while `n >= 2`, so it never dies and
/// query-max is O(1).
#[derive(Debug, Clone)]
pub struct PopulationState {
    alive: BinaryHeap<Reverse<AliveType>>,
    record: AliveType,
    births: u64,
    time: f64,
    max_population: u64,
}

impl PopulationState {
    /// A single initial type (id 0, born at time 0) with uniform fitness.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::with_initial_fitness(rng.random::<f64>())
    }

    pub fn with_initial_fitness(fitness: f64) -> Self {
        let root = AliveType {
            id: 0,
            fitness,
            birth_time: 0.0,
        };
        let mut alive = BinaryHeap::new();
        alive.push(Reverse(root));
        Self {
            alive,
            record: root,
            births: 1,
            time: 0.0,
            max_population: DEFAULT_MAX_POPULATION,
        }
    }

    /// Types with the given fitnesses, ids `0..k`, all born at time 0.
    pub fn from_fitnesses(fitnesses: &[f64]) -> Result<Self> {
        let (first, rest) = fitnesses
            .split_first()
            .ok_or(Error::InvalidCall("population needs at least one type"))?;
        let mut state = Self::with_initial_fitness(*first);
        for &fitness in rest {
            state.insert(fitness)?;
        }
        Ok(state)
    }

    pub fn set_max_population(&mut self, cap: u64) {
        self.max_population = cap;
    }

    /// Number of alive types, `n`.
    pub fn size(&self) -> u64 {
        self.alive.len() as u64
    }

    /// Number of types ever created, including the initial one, `S`.
    pub fn births(&self) -> u64 {
        self.births
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        debug_assert!(time >= self.time);
        self.time = time;
    }

    /// The alive type of maximal fitness.
    pub fn record_holder(&self) -> AliveType {
        self.record
    }

    /// The alive type of minimal fitness (the next to die).
    pub fn weakest(&self) -> AliveType {
        self.alive.peek().expect("population is never empty").0
    }

    /// Alive types in unspecified but deterministic order.
    pub fn alive(&self) -> impl Iterator<Item = &AliveType> + '_ {
        self.alive.iter().map(|Reverse(a)| a)
    }

    /// Waiting time and kind of the next event from this state.
    pub fn next_event<R: Rng + ?Sized>(&self, lambda: f64, rng: &mut R) -> (f64, EventKind) {
        next_event(self.size(), lambda, rng)
    }

    /// A new type with the next id and uniform fitness, born now.
    pub fn apply_birth<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<TypeRecord> {
        let fitness = rng.random::<f64>();
        self.insert(fitness)
    }

    fn insert(&mut self, fitness: f64) -> Result<TypeRecord> {
        if self.size() >= self.max_population {
            return Err(Error::Explosion {
                cap: Cap::Population,
                limit: self.max_population,
                time: self.time,
                replicate: None,
                partial: None,
            });
        }
        let newborn = AliveType {
            id: self.births,
            fitness,
            birth_time: self.time,
        };
        self.births += 1;
        if newborn > self.record {
            self.record = newborn;
        }
        self.alive.push(Reverse(newborn));
        Ok(newborn.into_record(None))
    }

    /// Kill the minimum-fitness type.
    pub fn apply_death(&mut self) -> Result<TypeRecord> {
        if self.alive.len() < 2 {
            return Err(Error::InvalidCall(
                "death requested with a single type alive",
            ));
        }
        let Reverse(victim) = self.alive.pop().expect("n >= 2");
        if victim.id == self.record.id {
            return Err(Error::Invariant(format!(
                "record holder t{} killed at time {}",
                victim.id, self.time
            )));
        }
        Ok(victim.into_record(Some(self.time)))
    }
}

/// Draw the waiting time and kind of the next event with `n` types alive.
///
/// For `n >= 2` this is one unit-exponential draw followed by one uniform
/// draw for the birth/death coin, in that order. With `n = 1` only a birth
/// is possible and the coin is not drawn.
pub fn next_event<R: Rng + ?Sized>(n: u64, lambda: f64, rng: &mut R) -> (f64, EventKind) {
    let e: f64 = rng.sample(Exp1);
    if n <= 1 {
        return (e / lambda, EventKind::Birth);
    }
    let rate = n as f64 * (1.0 + lambda);
    let u: f64 = rng.random();
    let kind = if u < lambda / (1.0 + lambda) {
        EventKind::Birth
    } else {
        EventKind::Death
    };
    (e / rate, kind)
}
