use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{SimConfig, Simulator, TypeId, DEFAULT_MAX_EVENTS, DEFAULT_MAX_POPULATION};
use crate::seed::replicate_seed;
use crate::stats::RunningMoments;

use super::config_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Fraction of replicates whose record holder at `alpha t` is still the
    /// record holder at `t`.
    Direct,
    /// Mean of `S(alpha t) / S(t)`: the probability of a match given the
    /// birth-death skeleton.
    Conditional,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Direct => "direct",
            Estimator::Conditional => "conditional",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Estimator::Direct),
            "conditional" => Ok(Estimator::Conditional),
            other => Err(Error::Argument(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceParams {
    pub lambda: f64,
    pub alpha: f64,
    pub t: f64,
    pub replicates: u64,
    pub master_seed: u64,
    pub max_events: u64,
    pub max_population: u64,
}

impl PersistenceParams {
    pub fn new(lambda: f64, alpha: f64, t: f64, replicates: u64, master_seed: u64) -> Self {
        Self {
            lambda,
            alpha,
            t,
            replicates,
            master_seed,
            max_events: DEFAULT_MAX_EVENTS,
            max_population: DEFAULT_MAX_POPULATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Argument(format!(
                "t must be positive, got {}",
                self.t
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Argument("replicates must be positive".into()));
        }
        self.sim_config(0).validate()
    }

    fn sim_config(&self, replicate: u64) -> SimConfig {
        SimConfig::new(
            self.lambda,
            self.t,
            replicate_seed(self.master_seed, replicate),
        )
        .without_events()
        .with_caps(self.max_events, self.max_population)
    }

    /// Capped replicates are dropped (and counted) only at the critical point,
    /// where excursions are heavy-tailed; elsewhere a cap is an error.
    fn excludes_truncated(&self) -> bool {
        self.lambda == 1.0
    }
}

/// What one replicate contributes to both estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub early_record: TypeId,
    pub late_record: TypeId,
    /// `S(alpha t)`.
    pub early_births: u64,
    /// `S(t)`.
    pub late_births: u64,
}

impl ReplicateOutcome {
    pub fn matched(&self) -> bool {
        self.early_record == self.late_record
    }

    pub fn conditional(&self) -> f64 {
        self.early_births as f64 / self.late_births as f64
    }
}

/// Outcomes of all kept replicates, in replicate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceRun {
    pub params: PersistenceParams,
    pub outcomes: Vec<ReplicateOutcome>,
    pub excluded: u64,
}

/// Simulate replicate `index`. Record-holder immortality is checked at every
/// death; a violation is an error.
pub fn run_replicate(params: &PersistenceParams, index: u64) -> Result<ReplicateOutcome> {
    let mut sim = Simulator::new(params.sim_config(index))?;
    sim.advance_to(params.alpha * params.t, |_, _| {})?;
    let early_record = sim.state().record_holder().id;
    let early_births = sim.state().births();
    sim.run(|_, _| {})?;
    let late = sim.state();
    Ok(ReplicateOutcome {
        early_record,
        late_record: late.record_holder().id,
        early_births,
        late_births: late.births(),
    })
}

/// Run every replicate (in parallel on the current rayon pool) and keep the
/// outcomes in replicate order.
pub fn run_persistence(params: &PersistenceParams) -> Result<PersistenceRun> {
    params.validate()?;
    let results: Vec<Result<ReplicateOutcome>> = (0..params.replicates)
        .into_par_iter()
        .map(|k| run_replicate(params, k).map_err(|e| e.with_replicate(k)))
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut excluded = 0;
    for result in results {
        match result {
            Ok(o) => outcomes.push(o),
            Err(e) if e.is_explosion() && params.excludes_truncated() => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if outcomes.is_empty() {
        return Err(Error::Domain("every replicate hit a cap".into()));
    }
    Ok(PersistenceRun {
        params: *params,
        outcomes,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceEstimate {
    pub lambda: f64,
    pub alpha: f64,
    pub t: f64,
    pub replicates: u64,
    pub excluded: u64,
    pub estimator: Estimator,
    pub point: f64,
    pub std_err: f64,
    pub master_seed: u64,
    pub config_hash: String,
}

impl PersistenceEstimate {
    pub fn from_run(run: &PersistenceRun, estimator: Estimator) -> Self {
        let kept = run.outcomes.len() as f64;
        let (point, std_err) = match estimator {
            Estimator::Direct => {
                let p = run.outcomes.iter().filter(|o| o.matched()).count() as f64 / kept;
                (p, (p * (1.0 - p) / kept).sqrt())
            }
            Estimator::Conditional => {
                let m: RunningMoments = run.outcomes.iter().map(|o| o.conditional()).collect();
                (m.mean(), m.std_err())
            }
        };
        let p = &run.params;
        Self {
            lambda: p.lambda,
            alpha: p.alpha,
            t: p.t,
            replicates: p.replicates,
            excluded: run.excluded,
            estimator,
            point,
            std_err,
            master_seed: p.master_seed,
            config_hash: config_hash(p),
        }
    }

    /// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with(&self, other: &Self, k: f64) -> bool {
        let combined = (self.std_err.powi(2) + other.std_err.powi(2)).sqrt();
        (self.point - other.point).abs() <= k * combined
    }
}

pub fn persistence_direct(params: &PersistenceParams) -> Result<PersistenceEstimate> {
    Ok(PersistenceEstimate::from_run(
        &run_persistence(params)?,
        Estimator::Direct,
    ))
}

pub fn persistence_conditional(params: &PersistenceParams) -> Result<PersistenceEstimate> {
    Ok(PersistenceEstimate::from_run(
        &run_persistence(params)?,
        Estimator::Conditional,
    ))
}

/// Both estimators from the same replicates (matched seeds).
pub fn persistence_paired(
    params: &PersistenceParams,
) -> Result<(PersistenceEstimate, PersistenceEstimate)> {
    let run = run_persistence(params)?;
    Ok((
        PersistenceEstimate::from_run(&run, Estimator::Direct),
        PersistenceEstimate::from_run(&run, Estimator::Conditional),
    ))
}

pub fn write_estimates_csv<W: Write>(writer: W, estimates: &[PersistenceEstimate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for e in estimates {
        out.serialize(e)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_estimates_json<W: Write>(writer: W, estimates: &[PersistenceEstimate]) -> Result<()> {
    serde_json::to_writer_pretty(writer, estimates)?;
    Ok(())
}
