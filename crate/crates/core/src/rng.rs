//! Deterministic seeding.
//!
//! Every random stream is a ChaCha12 generator keyed by a 64-bit seed. Seeds for
//! sub-streams (trials, grid cells, test sets) are derived from a base seed by
//! folding the indices through the SplitMix64 finalizer, so a stream depends only
//! on its coordinates and never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha12Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and an ordered list of indices.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(mix64(base), |acc, &k| {
        mix64(acc ^ k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
    })
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}
