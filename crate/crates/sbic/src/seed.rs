//! Deterministic RNG streams.
//!
//! Restarts and replicates run in parallel, so each unit of work draws from
//! its own stream keyed by `(master seed, a, b)`. Results are then
//! independent of the thread schedule, and growing one key range never
//! disturbs the streams of existing keys.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Well-mixed 64-bit seed for the stream `(master, a, b)`.
pub fn stream_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master).wrapping_add(a)).wrapping_add(b))
}

/// RNG for the stream `(master, a, b)`.
pub fn stream_rng(master: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, a, b))
}
