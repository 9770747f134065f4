//! Deterministic random streams.
//!
//! Every consumer of randomness derives its generator from a user seed plus
//! a fixed tag and an index, so that work can be split across threads (or
//! reordered) without changing any drawn value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags. Distinct tags keep unrelated consumers of one seed apart.
pub mod tag {
    pub const ENSEMBLE_REFERENCE: u64 = 1;
    pub const ENSEMBLE_QUERY: u64 = 2;
    pub const DIRECTIONS: u64 = 3;
    pub const WEIGHTS: u64 = 4;
    pub const SIMULATION: u64 = 5;
    pub const SIMULATION_TEST: u64 = 6;
    pub const REDRAW: u64 = 7;
    pub const SELECTION: u64 = 8;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed, e.g. the sub-seed of one replicate.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(tag)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Independent generator for `(seed, tag, index)`.
pub fn substream(seed: u64, tag: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(tag)));
    rng.set_stream(index);
    rng
}
