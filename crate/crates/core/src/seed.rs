//! Seeding for independent replicates.
//!
//! Every replicate owns one [`SimRng`]. Replicate `k` of a run with master
//! seed `m` is seeded with [`replicate_seed(m, k)`](replicate_seed), which is
//! two rounds of the SplitMix64 finalizer:
//!
//! ```text
//! replicate_seed(m, k) = mix64(m ^ mix64(k + 0x9E3779B97F4A7C15))
//! ```
//!
//! The mapping is fixed; changing it changes every published result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every trajectory and sampler in this crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replicate_seed(master_seed: u64, replicate: u64) -> u64 {
    mix64(master_seed ^ mix64(replicate.wrapping_add(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn replicate_rng(master_seed: u64, replicate: u64) -> SimRng {
    rng_from_seed(replicate_seed(master_seed, replicate))
}

/// Seed for an auxiliary stream (e.g. tree attachment) that must not perturb
/// the draws of the main stream seeded with `seed`.
pub fn auxiliary_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed).wrapping_add(stream.wrapping_mul(GOLDEN_GAMMA)) ^ 0xA5A5_A5A5_A5A5_A5A5)
}
