//! Seed splitting.
//!
//! A run has one root seed. Every stage and fold gets its own seed from
//! `derive(root, tag, index)`: the tag is hashed with 64-bit FNV-1a, xor-ed
//! into the root together with the index, and the result is passed through
//! the SplitMix64 finalizer. Stages therefore stay reproducible on their own
//! and never share a random stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for stage `tag`, instance `index`.
pub fn derive(root: u64, tag: &str, index: u64) -> u64 {
    splitmix64(root ^ fnv1a(tag) ^ splitmix64(index))
}

/// Deterministic generator used everywhere randomness is needed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
