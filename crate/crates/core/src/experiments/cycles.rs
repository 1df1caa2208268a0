use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{BirthDeathChain, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CycleRegime {
    /// Excursions between successive visits to a single type.
    ReturnTo1,
    /// Passages from level `n` to a new high `n + 1`.
    FirstPassage,
}

/// Duration and number of births of one renewal cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub tau: f64,
    pub sigma: u64,
    pub regime: CycleRegime,
    /// Starting level for first passages.
    pub level: Option<u64>,
}

/// Completed cycles plus the number dropped at the event cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBatch {
    pub samples: Vec<CycleSample>,
    pub truncated: u64,
}

impl CycleBatch {
    pub fn taus(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.tau).collect()
    }
}

/// One passage from `level` types to `level + 1`; `None` if it needs more
/// than `max_events` events.
pub fn sample_first_passage<R: Rng + ?Sized>(
    lambda: f64,
    level: u64,
    max_events: u64,
    rng: &mut R,
) -> Result<Option<CycleSample>> {
    if level == 0 {
        return Err(Error::Argument("level must be at least 1".into()));
    }
    let mut chain = BirthDeathChain::new(lambda, level);
    let mut events = 0;
    while chain.size() <= level {
        if events == max_events {
            return Ok(None);
        }
        chain.step(rng);
        events += 1;
    }
    Ok(Some(CycleSample {
        tau: chain.time(),
        sigma: chain.births() - level,
        regime: CycleRegime::FirstPassage,
        level: Some(level),
    }))
}

/// One excursion from a single type back to a single type.
pub fn sample_return_cycle<R: Rng + ?Sized>(
    lambda: f64,
    max_events: u64,
    rng: &mut R,
) -> Option<CycleSample> {
    let mut chain = BirthDeathChain::new(lambda, 1);
    let mut events = 0;
    loop {
        if events == max_events {
            return None;
        }
        chain.step(rng);
        events += 1;
        if chain.size() == 1 {
            break;
        }
    }
    Some(CycleSample {
        tau: chain.time(),
        sigma: chain.births() - 1,
        regime: CycleRegime::ReturnTo1,
        level: None,
    })
}

/// Time to go from two types down to one; `None` past `max_events`.
pub fn sample_hit_one_from_two<R: Rng + ?Sized>(
    lambda: f64,
    max_events: u64,
    rng: &mut R,
) -> Option<f64> {
    let mut chain = BirthDeathChain::new(lambda, 2);
    let mut events = 0;
    while chain.size() > 1 {
        if events == max_events {
            return None;
        }
        chain.step(rng);
        events += 1;
    }
    Some(chain.time())
}

/// `count` cycles of the given regime.
///
/// `ReturnTo1` gives i.i.d. excursions and needs `lambda <= 1`. `FirstPassage`
/// gives the passages of levels `1..=count`, which are independent, and needs
/// `lambda > 1`. Cycles longer than `max_events_per_cycle` events are dropped
/// and counted in `truncated`.
pub fn sample_cycles<R: Rng + ?Sized>(
    lambda: f64,
    regime: CycleRegime,
    count: u64,
    max_events_per_cycle: u64,
    rng: &mut R,
) -> Result<CycleBatch> {
    let mut samples = Vec::with_capacity(count as usize);
    let mut truncated = 0;
    match regime {
        CycleRegime::ReturnTo1 => {
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::Domain(format!(
                    "return-to-one cycles are a.s. finite only for 0 < lambda <= 1, got {lambda}"
                )));
            }
            for _ in 0..count {
                match sample_return_cycle(lambda, max_events_per_cycle, rng) {
                    Some(c) => samples.push(c),
                    None => truncated += 1,
                }
            }
        }
        CycleRegime::FirstPassage => {
            if !(lambda > 1.0 && lambda.is_finite()) {
                return Err(Error::Domain(format!(
                    "first-passage cycles need a supercritical lambda > 1, got {lambda}"
                )));
            }
            for level in 1..=count {
                match sample_first_passage(lambda, level, max_events_per_cycle, rng)? {
                    Some(c) => samples.push(c),
                    None => truncated += 1,
                }
            }
        }
    }
    Ok(CycleBatch { samples, truncated })
}

/// Number of returns to a single type by each time in `grid` (sorted),
/// starting from one type at time 0. `None` past `max_events`.
pub fn returns_to_one_on_grid<R: Rng + ?Sized>(
    lambda: f64,
    grid: &[f64],
    max_events: u64,
    rng: &mut R,
) -> Option<Vec<u64>> {
    let mut chain = BirthDeathChain::new(lambda, 1);
    let mut returns = 0u64;
    let mut events = 0u64;
    let mut out = Vec::with_capacity(grid.len());
    for &until in grid {
        loop {
            if events == max_events {
                return None;
            }
            let before = chain.size();
            match chain.step_until(until, rng) {
                Some(EventKind::Death) if before == 2 => returns += 1,
                Some(_) => {}
                None => break,
            }
            events += 1;
        }
        out.push(returns);
    }
    Some(out)
}
