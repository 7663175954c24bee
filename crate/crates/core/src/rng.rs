//! Seeded random streams.
//!
//! Every stochastic component draws from a [`SimRng`] derived from a 64-bit
//! seed. Independent streams (Monte Carlo trials, world vs. strategy phases)
//! are obtained with [`split_seed`], so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `index` from `master`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Named sub-streams of a scenario run.
pub mod stream {
    pub const WORLD: u64 = 0x5744;
    pub const STRATEGIES: u64 = 0x5354;
    pub const BASELINE: u64 = 0x424C;
    pub const CORE: u64 = 0x434F;
}
