use rand::Rng;

use super::{next_event, EventKind};

/// The birth-death skeleton of the population: counts only, no fitnesses.
///
/// Uses the same event draws as the full population, so it is the cheap
/// route for everything that depends only on `n` and `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthDeathChain {
    lambda: f64,
    n: u64,
    births: u64,
    time: f64,
}

impl BirthDeathChain {
    /// Start with `n` types at time 0. `births` starts at `n`.
    pub fn new(lambda: f64, n: u64) -> Self {
        assert!(n >= 1, "the chain lives on n >= 1");
        Self {
            lambda,
            n,
            births: n,
            time: 0.0,
        }
    }

    pub fn size(&self) -> u64 {
        self.n
    }

    pub fn births(&self) -> u64 {
        self.births
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Draw the next event and apply it unconditionally.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> EventKind {
        let (wait, kind) = next_event(self.n, self.lambda, rng);
        self.time += wait;
        self.apply(kind);
        kind
    }

    /// Draw the next event; apply it only if it happens by `until`.
    ///
    /// Returns `None` (and leaves the clock at `until`) when the next event
    /// falls after `until`. The straddling wait is discarded.
    pub fn step_until<R: Rng + ?Sized>(&mut self, until: f64, rng: &mut R) -> Option<EventKind> {
        let (wait, kind) = next_event(self.n, self.lambda, rng);
        if self.time + wait > until {
            self.time = until;
            return None;
        }
        self.time += wait;
        self.apply(kind);
        Some(kind)
    }

    fn apply(&mut self, kind: EventKind) {
        match kind {
            EventKind::Birth => {
                self.n += 1;
                self.births += 1;
            }
            EventKind::Death => self.n -= 1,
        }
    }
}
