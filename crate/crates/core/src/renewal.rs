//! First-passage moments of the supercritical chain, the critical hitting
//! law, and the reflected random walk behind the per-cycle birth counts.
//!
//! Tables are 1-based: index `n` holds the level-`n` quantity and index 0
//! holds zero (in particular `mu[0] = 0`).

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative agreement required between the closed form and the recursion.
pub const RECURSION_AGREEMENT: f64 = 1e-12;

fn require_supercritical(lambda: f64) -> Result<()> {
    if lambda > 1.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "first-passage moments need a supercritical birth rate (lambda > 1), got {lambda}"
        )))
    }
}

/// `a_n = sum_{j=1..n} lambda^{-j} b_{n+1-j}` for `b = (b_1, ..., b_N)`.
///
/// Terms are accumulated from `j = n` down to `j = 1`; powers that underflow
/// to zero are skipped.
pub fn solve_recursion_closed(lambda: f64, b: &[f64]) -> Vec<f64> {
    let powers: Vec<f64> = (0..=b.len()).map(|j| lambda.powi(-(j as i32))).collect();
    let nonzero = powers.iter().rposition(|&p| p != 0.0).unwrap_or(0);
    (1..=b.len())
        .map(|n| {
            let top = n.min(nonzero);
            (1..=top).rev().map(|j| powers[j] * b[n - j]).sum::<f64>()
        })
        .collect()
}

/// `a_1 = b_1 / lambda`, `lambda a_n = b_n + a_{n-1}`.
pub fn solve_recursion_iterated(lambda: f64, b: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    b.iter()
        .map(|&bn| {
            prev = (bn + prev) / lambda;
            prev
        })
        .collect()
}

/// Solve `lambda a_n = b_n + a_{n-1}` (with `a_0 = 0`) both ways and check
/// they agree to [`RECURSION_AGREEMENT`]. Returns the closed form.
pub fn solve_recursion(lambda: f64, b: &[f64]) -> Result<Vec<f64>> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be finite and nonzero, got {lambda}"
        )));
    }
    if let Some(bad) = b.iter().find(|x| !x.is_finite()) {
        return Err(Error::Argument(format!("non-finite forcing term {bad}")));
    }
    let closed = solve_recursion_closed(lambda, b);
    let iterated = solve_recursion_iterated(lambda, b);
    for (n, (&c, &r)) in closed.iter().zip(&iterated).enumerate() {
        let scale = c.abs().max(r.abs());
        if (c - r).abs() > RECURSION_AGREEMENT * scale && scale > f64::MIN_POSITIVE {
            return Err(Error::Numerical(format!(
                "closed form {c} and recursion {r} disagree at n = {}",
                n + 1
            )));
        }
    }
    Ok(closed)
}

fn padded(values: Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    out.extend(values);
    out
}

/// Mean first-passage times `mu[n] = E tau_n` from level `n` to `n + 1`.
pub fn mu_table(lambda: f64, n_max: usize) -> Result<Vec<f64>> {
    require_supercritical(lambda)?;
    let forcing: Vec<f64> = (1..=n_max).map(|n| 1.0 / n as f64).collect();
    Ok(padded(solve_recursion(lambda, &forcing)?))
}

fn forcing_terms(lambda: f64, mu: &[f64]) -> Vec<f64> {
    (1..mu.len())
        .map(|n| {
            let nf = n as f64;
            let s = mu[n] + mu[n - 1];
            1.0 / ((1.0 + lambda) * nf * nf) + lambda / (1.0 + lambda) * s * s
        })
        .collect()
}

/// Forcing terms `b` and variances `v[n] = Var tau_n`, both 1-based.
pub fn variance_table(lambda: f64, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mu = mu_table(lambda, n_max)?;
    variance_from_mu(lambda, &mu)
}

fn variance_from_mu(lambda: f64, mu: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = forcing_terms(lambda, mu);
    let v = solve_recursion(lambda, &b)?;
    Ok((padded(b), padded(v)))
}

/// Neumaier-compensated running sums of `terms`, 1-based with a leading 0.
fn running_sums(terms: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// `d[n] = E T_n - H_n / (lambda - 1)`, accumulated term by term.
pub fn harmonic_deviation(lambda: f64, mu: &[f64]) -> Result<Vec<f64>> {
    require_supercritical(lambda)?;
    Ok(running_sums(
        (1..mu.len()).map(|k| mu[k] - 1.0 / (k as f64 * (lambda - 1.0))),
    ))
}

/// `d[n]` for `n = 0..=n_max` (see [`harmonic_deviation`]).
pub fn harmonic_asymptote_check(lambda: f64, n_max: usize) -> Result<Vec<f64>> {
    let mu = mu_table(lambda, n_max)?;
    harmonic_deviation(lambda, &mu)
}

/// Per-level first-passage statistics for one supercritical `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub v: Vec<f64>,
    pub b: Vec<f64>,
    /// `expected_passage[n] = E T_n`, the mean hitting time of `n + 1`.
    pub expected_passage: Vec<f64>,
    pub deviation: Vec<f64>,
}

#[derive(Serialize)]
struct MomentRow {
    n: usize,
    mu: f64,
    v: f64,
    b: f64,
    #[serde(rename = "ET")]
    expected_passage: f64,
    deviation: f64,
}

impl MomentTable {
    pub fn compute(lambda: f64, n_max: usize) -> Result<Self> {
        let mu = mu_table(lambda, n_max)?;
        let (b, v) = variance_from_mu(lambda, &mu)?;
        let expected_passage = running_sums(mu.iter().skip(1).copied());
        let deviation = harmonic_deviation(lambda, &mu)?;
        Ok(Self {
            lambda,
            mu,
            v,
            b,
            expected_passage,
            deviation,
        })
    }

    pub fn n_max(&self) -> usize {
        self.mu.len() - 1
    }

    /// CSV with header `n,mu,v,b,ET,deviation`, one row per level.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for n in 1..=self.n_max() {
            out.serialize(MomentRow {
                n,
                mu: self.mu[n],
                v: self.v[n],
                b: self.b[n],
                expected_passage: self.expected_passage[n],
                deviation: self.deviation[n],
            })?;
        }
        if self.n_max() == 0 {
            out.write_record(["n", "mu", "v", "b", "ET", "deviation"])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The heavy-tailed law `F(t) = t / (1 + t)` that the critical analysis
/// assigns to the time to hit 1 from 2 at `lambda = 1`.
///
/// `F` solves `F' = (1 - F)^2`, the backward equation of a critical linear
/// birth-death process with per-capita rates. In this chain a state with `k`
/// types jumps at rate `2k` rather than `2(k - 1)`, so the simulated hitting
/// time is stochastically smaller (about 0.64 at `t = 1` against `F(1) = 0.5`)
/// while keeping a `1/t` tail. The sampler draws from `F` itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CriticalHittingCdf;

impl CriticalHittingCdf {
    pub fn cdf(&self, t: f64) -> Result<f64> {
        critical_cdf(t)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        q / (1.0 - q)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        critical_hit_sampler(rng)
    }
}

pub fn critical_cdf(t: f64) -> Result<f64> {
    if t >= 0.0 {
        Ok(if t.is_infinite() { 1.0 } else { t / (1.0 + t) })
    } else {
        Err(Error::Domain(format!(
            "hitting-time CDF needs t >= 0, got {t}"
        )))
    }
}

/// Inverse-CDF draw `Q / (1 - Q)` with `Q` uniform on `[0, 1)`.
pub fn critical_hit_sampler<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let q: f64 = rng.random();
    q / (1.0 - q)
}

/// One excursion of the walk reflected at `-n_level + 1`, stopped at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectedWalkSample {
    pub n_level: u64,
    /// Steps taken to hit 1 (always odd).
    pub steps: u64,
    /// Up-steps taken, `(1 + steps) / 2`: the births in one first-passage cycle.
    pub sigma: u64,
}

/// Same for the unreflected walk, the `n_level -> infinity` reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeWalkSample {
    pub steps: u64,
    pub sigma: u64,
}

fn up_probability(lambda: f64) -> f64 {
    lambda / (lambda + 1.0)
}

fn check_walk_args(lambda: f64, n_level: u64) -> Result<()> {
    require_supercritical(lambda)?;
    if n_level == 0 {
        return Err(Error::Argument("n_level must be at least 1".into()));
    }
    Ok(())
}

/// Births during one passage from level `n_level` to `n_level + 1`, via the
/// embedded jump chain.
///
/// Position 0 is the starting level and the barrier `-n_level + 1` is a
/// population of one type, which can only grow: from there the walk steps
/// up without drawing.
pub fn sample_sigma<R: Rng + ?Sized>(
    lambda: f64,
    n_level: u64,
    rng: &mut R,
) -> Result<ReflectedWalkSample> {
    check_walk_args(lambda, n_level)?;
    let p_up = up_probability(lambda);
    let barrier = 1 - n_level as i64;
    let (mut pos, mut steps) = (0i64, 0u64);
    while pos < 1 {
        if pos == barrier || rng.random::<f64>() < p_up {
            pos += 1;
        } else {
            pos -= 1;
        }
        steps += 1;
    }
    Ok(ReflectedWalkSample {
        n_level,
        steps,
        sigma: steps.div_ceil(2),
    })
}

pub fn sample_free_walk<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<FreeWalkSample> {
    require_supercritical(lambda)?;
    let p_up = up_probability(lambda);
    let (mut pos, mut steps) = (0i64, 0u64);
    while pos < 1 {
        pos += if rng.random::<f64>() < p_up { 1 } else { -1 };
        steps += 1;
    }
    Ok(FreeWalkSample {
        steps,
        sigma: steps.div_ceil(2),
    })
}

/// Reflected and free walks driven by one shared stream of step draws.
///
/// Both walks consume one draw per step; at the barrier the reflected walk
/// ignores its draw and steps up. Hence the free walk never lies above the
/// reflected one and `sigma_reflected <= sigma_free`.
pub fn sample_sigma_coupled<R: Rng + ?Sized>(
    lambda: f64,
    n_level: u64,
    rng: &mut R,
) -> Result<(ReflectedWalkSample, FreeWalkSample)> {
    check_walk_args(lambda, n_level)?;
    let p_up = up_probability(lambda);
    let barrier = 1 - n_level as i64;
    let (mut reflected, mut free) = (0i64, 0i64);
    let mut reflected_steps = None;
    let mut steps = 0u64;
    while free < 1 {
        let up = rng.random::<f64>() < p_up;
        steps += 1;
        free += if up { 1 } else { -1 };
        if reflected_steps.is_none() {
            reflected += if up || reflected == barrier { 1 } else { -1 };
            if reflected == 1 {
                reflected_steps = Some(steps);
            }
        }
    }
    let reflected_steps = reflected_steps.expect("reflected walk dominates the free walk");
    Ok((
        ReflectedWalkSample {
            n_level,
            steps: reflected_steps,
            sigma: reflected_steps.div_ceil(2),
        },
        FreeWalkSample {
            steps,
            sigma: steps.div_ceil(2),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn geometric_forcing() {
        let mut b = vec![0.0; 30];
        b[0] = 1.0;
        let a = solve_recursion(2.0, &b).unwrap();
        for (i, &x) in a.iter().enumerate() {
            assert_eq!(x, 2f64.powi(-(i as i32 + 1)));
        }
    }

    #[test]
    fn empty_forcing() {
        assert!(solve_recursion(2.0, &[]).unwrap().is_empty());
    }

    #[test]
    fn harmonic_forcing_gives_mu() {
        let b: Vec<f64> = (1..=20).map(|n| 1.0 / n as f64).collect();
        let a = solve_recursion(2.0, &b).unwrap();
        let mu = mu_table(2.0, 20).unwrap();
        assert_eq!(&mu[1..], &a[..]);
    }

    #[test]
    fn small_mu_values() {
        let mu = mu_table(2.0, 3).unwrap();
        assert_eq!(mu[0], 0.0);
        assert_eq!(mu[1], 0.5);
        assert!((mu[2] - 0.5).abs() < 1e-12);
        assert!((mu[3] - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn first_variance_is_exponential() {
        for lambda in [1.1, 2.0, 3.5, 10.0] {
            let (b, v) = variance_table(lambda, 5).unwrap();
            assert!((b[1] - 1.0 / lambda).abs() < 1e-12);
            assert!((v[1] - 1.0 / (lambda * lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn subcritical_tables_rejected() {
        for lambda in [0.5, 1.0] {
            let err = mu_table(lambda, 5).unwrap_err();
            assert!(err.to_string().contains("supercritical"));
            assert!(variance_table(lambda, 5).is_err());
            assert!(MomentTable::compute(lambda, 5).is_err());
        }
    }

    #[test]
    fn first_deviation() {
        let d = harmonic_asymptote_check(2.0, 1).unwrap();
        assert_eq!(d[1], 0.5 - 1.0);
        let d = harmonic_asymptote_check(4.0, 1).unwrap();
        assert!((d[1] - (0.25 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn tables_are_positive_and_increasing() {
        let table = MomentTable::compute(1.5, 2000).unwrap();
        for n in 1..=table.n_max() {
            assert!(table.mu[n] > 0.0);
            assert!(table.v[n] > 0.0);
            assert!(table.expected_passage[n] > table.expected_passage[n - 1]);
        }
    }

    #[test]
    fn mu_decays_like_inverse_level() {
        for lambda in [1.5, 2.0, 4.0] {
            let mu = mu_table(lambda, 10_000).unwrap();
            let n = 10_000;
            let r = n as f64 * mu[n] * (lambda - 1.0);
            assert!((r - 1.0).abs() < 0.01, "lambda {lambda}: {r}");
            // Eventually decreasing.
            assert!(mu[n] < mu[n - 1]);
        }
    }

    #[test]
    fn variance_decays_like_inverse_square() {
        for lambda in [1.5, 2.0, 4.0] {
            let (_, v) = variance_table(lambda, 2000).unwrap();
            let ratio = v[2000] / v[1000];
            assert!(
                (ratio - 0.25).abs() < 0.25 * 0.05,
                "lambda {lambda}: {ratio}"
            );
        }
    }

    #[test]
    fn csv_header_and_first_row() {
        let table = MomentTable::compute(2.0, 1).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,mu,v,b,ET,deviation"));
        assert_eq!(lines.next(), Some("1,0.5,0.25,0.5,0.5,-0.5"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn critical_cdf_values() {
        assert_eq!(critical_cdf(0.0).unwrap(), 0.0);
        assert_eq!(critical_cdf(1.0).unwrap(), 0.5);
        assert_eq!(critical_cdf(f64::INFINITY).unwrap(), 1.0);
        assert!(critical_cdf(-0.1).is_err());
        assert!(critical_cdf(f64::NAN).is_err());
        let cdf = CriticalHittingCdf;
        assert!((cdf.cdf(cdf.quantile(0.3)).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn level_one_has_one_birth() {
        let mut rng = rng_from_seed(10);
        for _ in 0..1000 {
            let s = sample_sigma(2.0, 1, &mut rng).unwrap();
            assert_eq!((s.steps, s.sigma), (1, 1));
        }
    }

    #[test]
    fn walk_args_checked() {
        let mut rng = rng_from_seed(0);
        assert!(sample_sigma(1.0, 3, &mut rng).is_err());
        assert!(sample_sigma(2.0, 0, &mut rng).is_err());
        assert!(sample_free_walk(0.9, &mut rng).is_err());
    }

    #[test]
    fn first_step_up_stops_immediately() {
        // Find a seed whose first draw is an up-step and check U = 1.
        for seed in 0..50 {
            let mut probe = rng_from_seed(seed);
            if probe.random::<f64>() < 2.0 / 3.0 {
                let mut rng = rng_from_seed(seed);
                let s = sample_sigma(2.0, 7, &mut rng).unwrap();
                assert_eq!((s.steps, s.sigma), (1, 1));
                return;
            }
        }
        panic!("no up-step seed found");
    }

    proptest! {
        #[test]
        fn closed_form_matches_recursion(
            lambda in prop_oneof![0.3f64..0.95, 1.05f64..6.0],
            b in proptest::collection::vec(0.0f64..10.0, 1..200),
        ) {
            let closed = solve_recursion_closed(lambda, &b);
            let iterated = solve_recursion_iterated(lambda, &b);
            for (c, r) in closed.iter().zip(&iterated) {
                let scale = c.abs().max(r.abs());
                prop_assert!((c - r).abs() <= RECURSION_AGREEMENT * scale || scale == 0.0);
            }
        }

        #[test]
        fn walk_invariants(seed in any::<u64>(), n_level in 1u64..20) {
            let mut rng = rng_from_seed(seed);
            let (reflected, free) = sample_sigma_coupled(1.7, n_level, &mut rng).unwrap();
            prop_assert_eq!(reflected.steps % 2, 1);
            prop_assert_eq!(reflected.sigma, reflected.steps.div_ceil(2));
            prop_assert!(reflected.sigma >= 1);
            prop_assert!(reflected.sigma <= free.sigma);
        }
    }
}
