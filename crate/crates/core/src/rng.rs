//! Random number generation.
//!
//! Every stochastic routine in the crate draws from [`BenchRng`], which is
//! xoshiro256++ seeded through SplitMix64. Both algorithms are fully
//! specified bit-for-bit, so a seed pins the same stream on every platform.
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat).

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type BenchRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> BenchRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Stream `index` of a family of non-overlapping streams rooted at `seed`.
///
/// Streams are separated with the xoshiro jump function (2^128 steps apart).
pub fn substream(seed: u64, index: usize) -> BenchRng {
    let mut rng = seeded(seed);
    for _ in 0..index {
        rng.jump();
    }
    rng
}
