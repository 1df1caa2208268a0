use serde::{Deserialize, Serialize};

use crate::error::{Cap, Error, Result};
use crate::seed::{rng_from_seed, SimRng};

use super::{
    Event, EventKind, EventLog, PopulationState, TypeRecord, DEFAULT_MAX_EVENTS,
    DEFAULT_MAX_POPULATION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lambda: f64,
    pub horizon: f64,
    pub max_events: u64,
    pub max_population: u64,
    pub seed: u64,
    /// Keep the event log in memory.
    pub record_events: bool,
    /// Keep every type ever born, dead ones included.
    pub retain_ledger: bool,
}

impl SimConfig {
    /// Default caps, event log recorded, no ledger.
    pub fn new(lambda: f64, horizon: f64, seed: u64) -> Self {
        Self {
            lambda,
            horizon,
            max_events: DEFAULT_MAX_EVENTS,
            max_population: DEFAULT_MAX_POPULATION,
            seed,
            record_events: true,
            retain_ledger: false,
        }
    }

    pub fn with_ledger(mut self) -> Self {
        self.retain_ledger = true;
        self
    }

    pub fn without_events(mut self) -> Self {
        self.record_events = false;
        self
    }

    pub fn with_caps(mut self, max_events: u64, max_population: u64) -> Self {
        self.max_events = max_events;
        self.max_population = max_population;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Argument(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Argument(format!(
                "horizon must be non-negative and finite, got {}",
                self.horizon
            )));
        }
        if self.max_events == 0 || self.max_population == 0 {
            return Err(Error::Argument("caps must be positive".into()));
        }
        Ok(())
    }
}

/// Output of a finished (or capped) run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub log: EventLog,
    pub state: PopulationState,
    /// Every type ever born, indexed by id; `None` unless requested.
    pub ledger: Option<Vec<TypeRecord>>,
}

/// Step-by-step driver for one trajectory.
///
/// The next event is drawn once and kept pending across calls to
/// [`advance_to`](Self::advance_to), so snapshotting at intermediate times
/// does not change the trajectory.
pub struct Simulator {
    config: SimConfig,
    state: PopulationState,
    rng: SimRng,
    pending: Option<(f64, EventKind)>,
    events_applied: u64,
    log: Option<EventLog>,
    ledger: Option<Vec<TypeRecord>>,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(config.seed);
        let mut state = PopulationState::new(&mut rng);
        state.set_max_population(config.max_population);
        let ledger = config.retain_ledger.then(|| {
            let root = state.record_holder();
            vec![TypeRecord {
                id: root.id,
                fitness: root.fitness,
                birth_time: 0.0,
                death_time: None,
                parent_id: None,
            }]
        });
        let log = config.record_events.then(|| EventLog::new(config.horizon));
        Ok(Self {
            config,
            state,
            rng,
            pending: None,
            events_applied: 0,
            log,
            ledger,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &PopulationState {
        &self.state
    }

    pub fn events_applied(&self) -> u64 {
        self.events_applied
    }

    /// Apply every event with time `<= until`, calling `observer` after each.
    pub fn advance_to<F>(&mut self, until: f64, mut observer: F) -> Result<()>
    where
        F: FnMut(&Event, &PopulationState),
    {
        if until > self.config.horizon || until < self.state.time() {
            return Err(Error::Argument(format!(
                "cannot advance from {} to {until} with horizon {}",
                self.state.time(),
                self.config.horizon
            )));
        }
        let lambda = self.config.lambda;
        loop {
            let (at, kind) = match self.pending {
                Some(p) => p,
                None => {
                    let (wait, kind) = self.state.next_event(lambda, &mut self.rng);
                    let p = (self.state.time() + wait, kind);
                    self.pending = Some(p);
                    p
                }
            };
            if at > until {
                break;
            }
            if self.events_applied >= self.config.max_events {
                return Err(Error::Explosion {
                    cap: Cap::Events,
                    limit: self.config.max_events,
                    time: self.state.time(),
                    replicate: None,
                    partial: None,
                });
            }
            self.pending = None;
            self.state.set_time(at);
            let record = match kind {
                EventKind::Birth => self.state.apply_birth(&mut self.rng)?,
                EventKind::Death => self.state.apply_death()?,
            };
            self.events_applied += 1;
            let event = Event {
                time: at,
                kind,
                type_id: record.id,
            };
            if let Some(ledger) = self.ledger.as_mut() {
                match kind {
                    EventKind::Birth => ledger.push(record),
                    EventKind::Death => ledger[record.id as usize].death_time = Some(at),
                }
            }
            if let Some(log) = self.log.as_mut() {
                log.events.push(event);
            }
            observer(&event, &self.state);
        }
        self.state.set_time(until);
        Ok(())
    }

    /// Run to the configured horizon.
    pub fn run<F>(&mut self, observer: F) -> Result<()>
    where
        F: FnMut(&Event, &PopulationState),
    {
        self.advance_to(self.config.horizon, observer)
    }

    /// Stop here. The pending event, if any, is discarded.
    pub fn finish(self) -> Trajectory {
        Trajectory {
            log: self
                .log
                .unwrap_or_else(|| EventLog::new(self.config.horizon)),
            state: self.state,
            ledger: self.ledger,
        }
    }
}

/// Simulate one trajectory to `config.horizon`.
///
/// On a cap the error carries everything recorded so far.
pub fn simulate(config: &SimConfig) -> Result<Trajectory> {
    let mut sim = Simulator::new(config.clone())?;
    match sim.run(|_, _| {}) {
        Ok(()) => Ok(sim.finish()),
        Err(Error::Explosion {
            cap,
            limit,
            time,
            replicate,
            ..
        }) => Err(Error::Explosion {
            cap,
            limit,
            time,
            replicate,
            partial: Some(Box::new(sim.finish())),
        }),
        Err(e) => Err(e),
    }
}
