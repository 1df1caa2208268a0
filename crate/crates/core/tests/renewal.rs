//! Moment tables, cycle samplers and walks against independent oracles.

use phylodrift::experiments::{
    sample_first_passage, sample_hit_one_from_two, sample_return_cycle, stable_ratio_check,
};
use phylodrift::renewal::{critical_cdf, harmonic_asymptote_check, sample_sigma, MomentTable};
use phylodrift::seed::rng_from_seed;
use phylodrift::stats::{ks_distance, RunningMoments};

/// Solve a tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Mean and variance of the time to go from `level` to `level + 1`, by first-step
/// analysis on states `1..=level` with the target absorbing.
fn passage_oracle(lambda: f64, level: usize) -> (f64, f64) {
    let rate = |k: usize| {
        if k == 1 {
            lambda
        } else {
            k as f64 * (1.0 + lambda)
        }
    };
    let p_up = |k: usize| if k == 1 { 1.0 } else { lambda / (1.0 + lambda) };
    let mut lower = vec![0.0; level];
    let mut diag = vec![1.0; level];
    let mut upper = vec![0.0; level];
    for i in 0..level {
        let k = i + 1;
        if k < level {
            upper[i] = -p_up(k);
        }
        if k > 1 {
            lower[i] = -(1.0 - p_up(k));
        }
        diag[i] = 1.0;
    }
    let rhs1: Vec<f64> = (1..=level).map(|k| 1.0 / rate(k)).collect();
    let h = thomas(&lower, &diag, &upper, &rhs1);
    let next = |i: usize, up: bool| -> f64 {
        if up {
            h.get(i + 1).copied().unwrap_or(0.0)
        } else {
            h[i - 1]
        }
    };
    let rhs2: Vec<f64> = (0..level)
        .map(|i| {
            let k = i + 1;
            let q = rate(k);
            let mut mean_rest = p_up(k) * next(i, true);
            if k > 1 {
                mean_rest += (1.0 - p_up(k)) * next(i, false);
            }
            2.0 / (q * q) + 2.0 / q * mean_rest
        })
        .collect();
    let m2 = thomas(&lower, &diag, &upper, &rhs2);
    (h[level - 1], m2[level - 1] - h[level - 1].powi(2))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn tables_match_first_step_analysis() {
    for &lambda in &[1.2, 1.5, 2.0, 3.0, 6.0] {
        let table = MomentTable::compute(lambda, 60).unwrap();
        for level in [1usize, 2, 3, 5, 10, 25, 60] {
            let (mean, var) = passage_oracle(lambda, level);
            assert!(
                rel(table.mu[level], mean) < 1e-10,
                "mu lambda={lambda} n={level}"
            );
            assert!(
                rel(table.v[level], var) < 1e-9,
                "v lambda={lambda} n={level}"
            );
        }
    }
}

#[test]
fn first_passage_simulation_matches_tables() {
    let lambda = 2.0;
    let table = MomentTable::compute(lambda, 8).unwrap();
    let mut rng = rng_from_seed(808);
    for level in [4u64, 8] {
        let taus: Vec<f64> = (0..40_000)
            .map(|_| {
                sample_first_passage(lambda, level, u64::MAX, &mut rng)
                    .unwrap()
                    .unwrap()
                    .tau
            })
            .collect();
        let m: RunningMoments = taus.iter().copied().collect();
        let mu = table.mu[level as usize];
        let v = table.v[level as usize];
        assert!(
            m.estimate().within(mu, 3.0),
            "level {level}: {:?} vs {mu}",
            m.estimate()
        );
        let sq: RunningMoments = taus.iter().map(|t| (t - m.mean()).powi(2)).collect();
        assert!(
            sq.estimate().within(v, 3.5),
            "level {level}: var {:?} vs {v}",
            sq.estimate()
        );
    }
}

#[test]
fn harmonic_deviation_matches_compensated_oracle() {
    for &lambda in &[1.5, 2.0, 4.0] {
        let d = harmonic_asymptote_check(lambda, 5000).unwrap();
        // Independent oracle: mu from the forward recursion, Kahan-summed.
        let (mut mu, mut sum, mut c) = (0.0f64, 0.0f64, 0.0f64);
        for (k, &got) in d.iter().enumerate().skip(1) {
            mu = 1.0 / (lambda * k as f64) + mu / lambda;
            let y = (mu - 1.0 / (k as f64 * (lambda - 1.0))) - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
            if k % 500 == 0 {
                assert!((got - sum).abs() < 1e-12, "lambda={lambda} k={k}");
            }
        }
        assert!(d[5000].abs() < d[500].abs());
    }
}

#[test]
fn subcritical_return_cycle_mean_matches_linear_solve() {
    let lambda = 0.5;
    // Expected hitting time of 1 from k on 2..=200, reflecting at 200.
    let states = 199;
    let mut lower = vec![0.0; states];
    let mut diag = vec![1.0; states];
    let mut upper = vec![0.0; states];
    let mut rhs = vec![0.0; states];
    for i in 0..states {
        let k = (i + 2) as f64;
        let reflecting = i == states - 1;
        let up = if reflecting { 0.0 } else { k * lambda };
        let total = up + k;
        rhs[i] = 1.0 / total;
        if !reflecting {
            upper[i] = -up / total;
        }
        if i > 0 {
            lower[i] = -k / total;
        }
        diag[i] = 1.0;
    }
    let h = thomas(&lower, &diag, &upper, &rhs);
    let oracle = 1.0 / lambda + h[0];
    assert!((oracle - (-(1.0f64 - lambda).ln()) / (lambda * lambda)).abs() < 1e-9);

    let mut rng = rng_from_seed(21);
    let taus: RunningMoments = (0..100_000)
        .map(|_| sample_return_cycle(lambda, u64::MAX, &mut rng).unwrap().tau)
        .collect();
    assert!(
        taus.estimate().within(oracle, 3.0),
        "{:?} vs {oracle}",
        taus.estimate()
    );
}

/// `P(hit 1 from 2 by t)` at `lambda = 1` for each `t` in `grid` (sorted),
/// from the forward equations on `{1, ..., cap}` with 1 absorbing.
fn critical_hit_law(grid: &[f64], cap: usize) -> Vec<f64> {
    let deriv = |p: &[f64]| -> Vec<f64> {
        let mut d = vec![0.0; cap + 1];
        for k in 2..=cap {
            let up = if k < cap { k as f64 } else { 0.0 };
            let out = (up + k as f64) * p[k];
            d[k] -= out;
            d[k - 1] += k as f64 * p[k];
            if k < cap {
                d[k + 1] += up * p[k];
            }
        }
        d
    };
    let mut p = vec![0.0; cap + 1];
    p[2] = 1.0;
    let dt = 5e-4;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        while now + 0.5 * dt < t {
            let k1 = deriv(&p);
            let tmp: Vec<f64> = p.iter().zip(&k1).map(|(x, k)| x + 0.5 * dt * k).collect();
            let k2 = deriv(&tmp);
            let tmp: Vec<f64> = p.iter().zip(&k2).map(|(x, k)| x + 0.5 * dt * k).collect();
            let k3 = deriv(&tmp);
            let tmp: Vec<f64> = p.iter().zip(&k3).map(|(x, k)| x + dt * k).collect();
            let k4 = deriv(&tmp);
            for k in 1..=cap {
                p[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
            }
            now += dt;
        }
        out.push(p[1]);
    }
    out
}

#[test]
fn critical_hitting_time_matches_forward_equations() {
    let mut rng = rng_from_seed(6);
    let mut samples: Vec<f64> = (0..10_000)
        .map(|_| sample_hit_one_from_two(1.0, 10_000_000, &mut rng).unwrap_or(f64::INFINITY))
        .collect();
    samples.sort_by(f64::total_cmp);
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.1).collect();
    let law = critical_hit_law(&grid, 300);
    let d = grid
        .iter()
        .zip(&law)
        .map(|(&t, &f)| {
            let ecdf = samples.partition_point(|&x| x <= t) as f64 / samples.len() as f64;
            (ecdf - f).abs()
        })
        .fold(0.0, f64::max);
    assert!(d < 0.02, "grid KS {d}");

    // The law t / (1 + t) belongs to a branching process with per-capita
    // rates; this chain moves faster and sits well above it at t = 1.
    assert!(
        law[9] - critical_cdf(1.0).unwrap() > 0.1,
        "F(1) = {}",
        law[9]
    );
    let whole = ks_distance(&samples, |t| critical_cdf(t).unwrap());
    assert!(whole > 0.1, "KS {whole}");
}

#[test]
fn hit_sampler_follows_its_cdf() {
    let mut rng = rng_from_seed(66);
    let samples: Vec<f64> = (0..20_000)
        .map(|_| phylodrift::renewal::critical_hit_sampler(&mut rng))
        .collect();
    let d = ks_distance(&samples, |t| critical_cdf(t).unwrap());
    assert!(d < 0.015, "KS {d}");
}

#[test]
fn critical_cycle_tail_has_slope_minus_one() {
    let mut rng = rng_from_seed(61);
    let reps = 100_000;
    let mut taus: Vec<f64> = (0..reps)
        .map(|_| {
            sample_return_cycle(1.0, 1_000_000, &mut rng)
                .map(|c| c.tau)
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    taus.sort_by(f64::total_cmp);
    let xs = [10.0f64, 30.0, 100.0, 300.0, 1000.0];
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| {
            let above = taus.len() - taus.partition_point(|&t| t <= x);
            (x.ln(), (above as f64 / reps as f64).ln())
        })
        .collect();
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - xm).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn reflected_walk_sigma_approaches_gamblers_ruin_mean() {
    let mut rng = rng_from_seed(9);
    let lambda = 3.0;
    let m: RunningMoments = (0..50_000)
        .map(|_| sample_sigma(lambda, 40, &mut rng).unwrap().sigma as f64)
        .collect();
    assert!(
        m.estimate().within(lambda / (lambda - 1.0), 3.0),
        "{:?}",
        m.estimate()
    );
}

#[test]
fn ratio_identity_for_small_n() {
    let mut rng = rng_from_seed(12);
    for n in [2usize, 3, 7] {
        let est = stable_ratio_check(n, 40_000, &mut rng).unwrap();
        assert!(est.within(1.0 / n as f64, 3.0), "n={n}: {est:?}");
    }
}
