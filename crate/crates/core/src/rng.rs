//! Seed handling. Every stochastic routine takes an explicit `u64` seed and
//! builds its own generator, so results never depend on call order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a base seed and a stream label.
pub fn derive_seed(base: u64, label: u64) -> u64 {
    mix(mix(base) ^ label.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Seed for the `index`-th parallel task of a sweep (`base + index`, mixed).
pub fn task_seed(base: u64, index: usize) -> u64 {
    mix(base.wrapping_add(index as u64))
}
