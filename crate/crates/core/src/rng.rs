//! Seed-derived random streams. Every stochastic component pulls from its
//! own ChaCha8 stream keyed by (seed, role), so adding draws to one
//! component never shifts another's sequence.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Stream for a named role under a run seed.
pub fn stream(seed: u64, role: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(role))
}

/// Indexed substream (per tree, per county, ...). The index is spread with a
/// 64-bit odd constant so neighboring indices do not produce related seeds.
pub fn substream(seed: u64, role: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(role) ^ index.wrapping_mul(0x9e3779b97f4a7c15))
}

/// Derived u64 seed for a named role, used where a component wants to own
/// its stream derivation (per-algorithm model seeds).
pub fn derive_seed(seed: u64, role: &str) -> u64 {
    seed ^ fnv1a64(role)
}
