//! Counter-based hashing for schedule-independent randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a seed and a sequence of words; order-sensitive.
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(seed), |h, &w| splitmix64(h ^ splitmix64(w)))
}

/// Deterministic RNG for one independent stream.
pub fn stream_rng(seed: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_words(seed, words))
}
