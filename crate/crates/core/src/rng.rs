//! Seeded random streams.
//!
//! Every realization draws from a ChaCha12 stream seeded through
//! `rand_core`'s `seed_from_u64`. Realization `k` of an ensemble with base
//! seed `s` uses seed `s` for `k = 0` and `splitmix64(s + k * 0x9E3779B97F4A7C15)`
//! otherwise, so a single run with seed `s` reproduces realization 0.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// Identifier written into output metadata.
pub const RNG_ALGORITHM: &str = "chacha12/rand_core-seed_from_u64";

pub const SEED_INCREMENT: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn realization_seed(base_seed: u64, index: usize) -> u64 {
    if index == 0 {
        base_seed
    } else {
        splitmix64(base_seed.wrapping_add((index as u64).wrapping_mul(SEED_INCREMENT)))
    }
}

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
