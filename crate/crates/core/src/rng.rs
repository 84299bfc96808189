//! Seed derivation. Every random stage draws from a ChaCha8 generator whose
//! seed is derived from the run seed and a stage label, so stages never share
//! a stream and adding a stage does not perturb the others.
//!
//! Per-test trace streams use the ChaCha stream counter: test `t` under seed
//! `s` draws from `ChaCha8Rng::seed_from_u64(derive(s, "traces"))` with
//! `set_stream(t)`. Adding tests never changes the traces of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed for a named stage.
pub fn derive(seed: u64, stage: &str) -> u64 {
    stage
        .bytes()
        .fold(mix(seed), |acc, b| mix(acc ^ u64::from(b)))
}

/// Derives a sub-seed for an indexed item within a stage (a fault, an
/// episode, a repetition).
pub fn derive_indexed(seed: u64, stage: &str, index: u64) -> u64 {
    mix(derive(seed, stage) ^ mix(index))
}

pub fn stage_rng(seed: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stage))
}

pub fn indexed_rng(seed: u64, stage: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_indexed(seed, stage, index))
}

/// The trace stream of one test.
pub fn test_stream(seed: u64, test_id: u32) -> ChaCha8Rng {
    let mut rng = stage_rng(seed, "traces");
    rng.set_stream(u64::from(test_id));
    rng
}
