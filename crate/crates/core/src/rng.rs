//! Counter-based randomness.
//!
//! Per-pixel draws are a pure function of `(seed, stream, draw, index)`, so
//! results never depend on iteration order or on how work is partitioned.
//! Sequential randomness (weight init, k-means seeding) uses ChaCha8 seeded
//! from the same `u64` seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent uses of one seed decorrelated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PseudoReference = 0x5052_4546,
    ActionSample = 0x4143_5453,
    Synth = 0x5359_4e54,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64 random bits keyed by the full counter tuple.
#[inline]
pub fn hash(seed: u64, stream: Stream, draw: u64, index: u64) -> u64 {
    let mut h = splitmix64(seed ^ stream as u64);
    h = splitmix64(h ^ draw);
    splitmix64(h ^ index)
}

/// Uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn uniform(seed: u64, stream: Stream, draw: u64, index: u64) -> f64 {
    (hash(seed, stream, draw, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n` (multiply-shift reduction).
#[inline]
pub fn below(seed: u64, stream: Stream, draw: u64, index: u64, n: usize) -> usize {
    debug_assert!(n > 0);
    ((hash(seed, stream, draw, index) as u128 * n as u128) >> 64) as usize
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
