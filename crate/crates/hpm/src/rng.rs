//! Deterministic random number streams.
//!
//! Every source of randomness in the crate is a named sub-stream derived
//! from one top-level seed. Two runs with the same seed draw identical
//! values from identically named streams, independent of what other
//! streams were used in between.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a named random stream from the top-level seed.
///
/// The label is folded together with the seed through FNV-1a, so distinct
/// labels yield statistically independent streams.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(hash)
}
