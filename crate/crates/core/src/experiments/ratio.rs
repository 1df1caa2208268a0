use rand::Rng;

use crate::error::{Error, Result};
use crate::renewal::critical_hit_sampler;
use crate::stats::{MeanEstimate, RunningMoments};

/// Empirical mean of `V_1 / (V_1 + ... + V_n)` for i.i.d. `V` drawn from the
/// critical hitting law. Each ratio lies in `[0, 1]`, so the mean is finite
/// even though `V` has no mean; by exchangeability it is `1 / n`.
pub fn stable_ratio_check<R: Rng + ?Sized>(
    n: usize,
    replicates: u64,
    rng: &mut R,
) -> Result<MeanEstimate> {
    ratio_check_with(n, replicates, |v| v, rng)
}

/// As [`stable_ratio_check`] with each draw passed through `transform`,
/// which must map to positive values.
pub fn ratio_check_with<R, F>(
    n: usize,
    replicates: u64,
    transform: F,
    rng: &mut R,
) -> Result<MeanEstimate>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if n == 0 || replicates == 0 {
        return Err(Error::Argument(
            "need n >= 1 and at least one replicate".into(),
        ));
    }
    let mut moments = RunningMoments::new();
    let mut draws = vec![0.0; n];
    for _ in 0..replicates {
        for v in draws.iter_mut() {
            *v = transform(critical_hit_sampler(rng));
        }
        let total: f64 = draws.iter().sum();
        // All-zero draws have probability zero; count them at the symmetric value.
        let ratio = if total > 0.0 {
            draws[0] / total
        } else {
            1.0 / n as f64
        };
        moments.push(ratio);
    }
    Ok(moments.estimate())
}
