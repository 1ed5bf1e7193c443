//! Seed derivation helpers.
//!
//! All randomness in the crate flows from explicit `u64` seeds. Distinct
//! purposes (net init, per-slot streams, match scheduling) derive child
//! seeds through `split_seed`, a splitmix64 finalizer over (seed, tag),
//! so streams never collide or alias across components.

use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; full-period bijective mixing of a 64-bit state.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a stream tag.
pub fn split_seed(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag))
}

/// A seeded ChaCha8 stream for the given (seed, tag) pair.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(split_seed(seed, tag))
}
