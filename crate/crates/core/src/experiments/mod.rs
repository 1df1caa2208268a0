//! Monte Carlo estimators and scaling diagnostics.
//!
//! Replicates run in parallel on the ambient rayon pool, each with its own
//! generator seeded from `(master_seed, replicate index)`. Results are always
//! assembled in replicate order, so outputs do not depend on the pool size.

mod cycles;
mod diagnostics;
mod persistence;
mod ratio;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cycles::{
    returns_to_one_on_grid, sample_cycles, sample_first_passage, sample_hit_one_from_two,
    sample_return_cycle, CycleBatch, CycleRegime, CycleSample,
};
pub use diagnostics::{diagnose_critical, diagnose_growth, ScalingDiagnostic};
pub use persistence::{
    persistence_conditional, persistence_direct, persistence_paired, run_persistence,
    run_replicate, write_estimates_csv, write_estimates_json, Estimator, PersistenceEstimate,
    PersistenceParams, PersistenceRun, ReplicateOutcome,
};
pub use ratio::{ratio_check_with, stable_ratio_check};

/// Short content hash of a parameter set: the first 16 hex digits of the
/// SHA-256 of its JSON encoding.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("parameter sets serialize");
    Sha256::digest(&json)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// The cartesian grid of a persistence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub ts: Vec<f64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.lambdas.len() * self.alphas.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in `lambda`, then `alpha`, then `t` order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.lambdas.iter().flat_map(move |&l| {
            self.alphas
                .iter()
                .flat_map(move |&a| self.ts.iter().map(move |&t| (l, a, t)))
        })
    }
}

/// Persistence estimates over a grid. Every grid point reuses `template`'s
/// master seed and caps, so a one-point sweep reproduces a single run.
pub fn sweep(
    grid: &SweepGrid,
    template: &PersistenceParams,
    estimators: &[Estimator],
) -> Result<Vec<PersistenceEstimate>> {
    if grid.is_empty() {
        return Err(Error::Argument("sweep grid is empty".into()));
    }
    if estimators.is_empty() {
        return Err(Error::Argument("no estimator selected".into()));
    }
    let mut out = Vec::with_capacity(grid.len() * estimators.len());
    for (lambda, alpha, t) in grid.points() {
        let params = PersistenceParams {
            lambda,
            alpha,
            t,
            ..*template
        };
        let run = run_persistence(&params)?;
        out.extend(
            estimators
                .iter()
                .map(|&e| PersistenceEstimate::from_run(&run, e)),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = PersistenceParams::new(0.5, 0.5, 10.0, 100, 1);
        let b = PersistenceParams {
            master_seed: 2,
            ..a
        };
        assert_eq!(config_hash(&a), config_hash(&a));
        assert_eq!(config_hash(&a).len(), 16);
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn one_point_sweep_matches_single_run() {
        let params = PersistenceParams::new(0.5, 0.4, 8.0, 200, 11);
        let grid = SweepGrid {
            lambdas: vec![0.5],
            alphas: vec![0.4],
            ts: vec![8.0],
        };
        let swept = sweep(&grid, &params, &[Estimator::Direct, Estimator::Conditional]).unwrap();
        let (d, c) = persistence_paired(&params).unwrap();
        assert_eq!(swept, vec![d, c]);
    }

    #[test]
    fn empty_grid_rejected() {
        let grid = SweepGrid {
            lambdas: vec![],
            alphas: vec![0.5],
            ts: vec![1.0],
        };
        let params = PersistenceParams::new(0.5, 0.5, 1.0, 10, 0);
        assert!(matches!(
            sweep(&grid, &params, &[Estimator::Direct]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn grid_order() {
        let grid = SweepGrid {
            lambdas: vec![0.5, 2.0],
            alphas: vec![0.25],
            ts: vec![1.0, 2.0],
        };
        let pts: Vec<_> = grid.points().collect();
        assert_eq!(
            pts,
            vec![
                (0.5, 0.25, 1.0),
                (0.5, 0.25, 2.0),
                (2.0, 0.25, 1.0),
                (2.0, 0.25, 2.0)
            ]
        );
    }
}
