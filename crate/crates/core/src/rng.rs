//! Deterministic RNG streams keyed by tuples of integers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a key tuple into a single 64-bit seed.
pub fn stream_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5eed_0f_9a11u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Independent ChaCha stream for the key tuple.
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(parts))
}
