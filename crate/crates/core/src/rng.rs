//! Seed fan-out helpers.
//!
//! Every randomized operation in this crate derives its generator from an
//! explicit `u64` seed through these functions, so batch jobs can hand each
//! item an independent substream while item `i`'s output stays fixed when the
//! batch grows or the worker count changes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer: a cheap, well-mixed `u64 -> u64` bijection.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for substream `index` of a master seed.
///
/// Closed form for the `index`-th output (0-based) of the SplitMix64 sequence
/// started at `master`, so substreams don't depend on how many came before.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Deterministic generator for one substream.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, index))
}

/// Generator seeded directly (index 0 of the stream).
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
