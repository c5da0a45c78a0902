//! Seed handling.
//!
//! Every random draw in the crate comes from a ChaCha8 generator
//! (`rand_chacha::ChaCha8Rng`). A generator is keyed by a 64-bit seed and,
//! where independent streams are needed (one per tree, one per class), by a
//! ChaCha stream number. Stage seeds are derived from the run seed as
//! `splitmix64(seed ^ fnv1a64(stage_name))`, so each pipeline stage can be
//! rerun on its own and still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a hash of a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One SplitMix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a named stage of a run.
pub fn stage_seed(run_seed: u64, stage: &str) -> u64 {
    splitmix64(run_seed ^ fnv1a64(stage.as_bytes()))
}

/// Generator for `seed`, positioned on ChaCha stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
