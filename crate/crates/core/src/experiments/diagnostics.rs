use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Cap, Error, Result};
use crate::population::{BirthDeathChain, DEFAULT_MAX_EVENTS, DEFAULT_MAX_POPULATION};
use crate::seed::replicate_rng;
use crate::stats::{median, Quartiles};

use super::cycles::returns_to_one_on_grid;

/// A statistic tracked over a grid of times, per replicate and summarized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDiagnostic {
    pub statistic: String,
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub summaries: Vec<Quartiles>,
    /// `per_replicate[r][g]`: replicate `r` at grid point `g`.
    pub per_replicate: Vec<Vec<f64>>,
    pub excluded: u64,
    pub master_seed: u64,
}

impl ScalingDiagnostic {
    fn build(
        statistic: &str,
        lambda: f64,
        grid: &[f64],
        per_replicate: Vec<Vec<f64>>,
        excluded: u64,
        master_seed: u64,
    ) -> Result<Self> {
        if per_replicate.is_empty() {
            return Err(Error::Domain("every replicate hit a cap".into()));
        }
        let summaries = (0..grid.len())
            .map(|g| Quartiles::of(&Self::column_of(&per_replicate, g)))
            .collect();
        Ok(Self {
            statistic: statistic.to_owned(),
            lambda,
            grid: grid.to_vec(),
            summaries,
            per_replicate,
            excluded,
            master_seed,
        })
    }

    fn column_of(rows: &[Vec<f64>], g: usize) -> Vec<f64> {
        rows.iter().map(|r| r[g]).collect()
    }

    pub fn column(&self, g: usize) -> Vec<f64> {
        Self::column_of(&self.per_replicate, g)
    }

    /// Median of `|statistic - center|` at grid point `g`.
    pub fn median_abs_deviation(&self, g: usize, center: f64) -> f64 {
        let devs: Vec<f64> = self.column(g).iter().map(|x| (x - center).abs()).collect();
        median(&devs)
    }

    /// Fraction of replicates with `|statistic - center| > width` at grid point `g`.
    pub fn fraction_outside(&self, g: usize, center: f64, width: f64) -> f64 {
        let col = self.column(g);
        col.iter().filter(|x| (*x - center).abs() > width).count() as f64 / col.len() as f64
    }

    /// Per replicate, the max over the grid points with time in `[from, to]`
    /// divided by the min there (infinite when the min is zero).
    pub fn range_ratios(&self, from: f64, to: f64) -> Vec<f64> {
        let cols: Vec<usize> = (0..self.grid.len())
            .filter(|&g| self.grid[g] >= from && self.grid[g] <= to)
            .collect();
        self.per_replicate
            .iter()
            .map(|row| {
                let (lo, hi) = cols.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &g| {
                    (lo.min(row[g]), hi.max(row[g]))
                });
                if lo > 0.0 {
                    hi / lo
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// `t,median,lower_quartile,upper_quartile` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "statistic",
            "t",
            "median",
            "lower_quartile",
            "upper_quartile",
        ])?;
        for (t, q) in self.grid.iter().zip(&self.summaries) {
            out.write_record([
                self.statistic.clone(),
                t.to_string(),
                q.median.to_string(),
                q.lower.to_string(),
                q.upper.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_grid(grid: &[f64], replicates: u64) -> Result<()> {
    if grid.is_empty() || replicates == 0 {
        return Err(Error::Argument(
            "need a nonempty grid and at least one replicate".into(),
        ));
    }
    if grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::Argument(
            "grid times must be finite and non-negative".into(),
        ));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
    {
        return Err(Error::Argument("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `exp(-(lambda - 1) t) N(t)` with `N(t) = n(t) - 1`, the number of
/// first-passage levels completed by `t`. One trajectory per replicate,
/// snapshotted at every grid time.
pub fn diagnose_growth(
    lambda: f64,
    grid: &[f64],
    replicates: u64,
    master_seed: u64,
) -> Result<ScalingDiagnostic> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "growth diagnostic needs a supercritical lambda > 1, got {lambda}"
        )));
    }
    check_grid(grid, replicates)?;
    let rows: Vec<Result<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(master_seed, k);
            let mut chain = BirthDeathChain::new(lambda, 1);
            let mut events = 0u64;
            let mut row = Vec::with_capacity(grid.len());
            for &t in grid {
                while chain.step_until(t, &mut rng).is_some() {
                    events += 1;
                    let over = if events > DEFAULT_MAX_EVENTS {
                        Some((Cap::Events, DEFAULT_MAX_EVENTS))
                    } else if chain.size() > DEFAULT_MAX_POPULATION {
                        Some((Cap::Population, DEFAULT_MAX_POPULATION))
                    } else {
                        None
                    };
                    if let Some((cap, limit)) = over {
                        return Err(Error::Explosion {
                            cap,
                            limit,
                            time: chain.time(),
                            replicate: Some(k),
                            partial: None,
                        });
                    }
                }
                row.push((-(lambda - 1.0) * t).exp() * (chain.size() - 1) as f64);
            }
            Ok(row)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    ScalingDiagnostic::build("exp(-(lambda-1)t)*N(t)", lambda, grid, rows, 0, master_seed)
}

/// `N(t) log t / t` at `lambda = 1`, with `N(t)` the number of returns to a
/// single type by `t`. Replicates past the event cap are dropped and counted.
pub fn diagnose_critical(
    grid: &[f64],
    replicates: u64,
    master_seed: u64,
) -> Result<ScalingDiagnostic> {
    check_grid(grid, replicates)?;
    let rows: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(master_seed, k);
            returns_to_one_on_grid(1.0, grid, DEFAULT_MAX_EVENTS, &mut rng).map(|counts| {
                counts
                    .iter()
                    .zip(grid)
                    .map(|(&n, &t)| if t > 0.0 { n as f64 * t.ln() / t } else { 0.0 })
                    .collect()
            })
        })
        .collect();
    let excluded = rows.iter().filter(|r| r.is_none()).count() as u64;
    ScalingDiagnostic::build(
        "N(t)*log(t)/t",
        1.0,
        grid,
        rows.into_iter().flatten().collect(),
        excluded,
        master_seed,
    )
}
