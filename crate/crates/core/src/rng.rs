//! Deterministic seed derivation.
//!
//! Every random decision in the pipeline is driven by a seed derived from
//! the run seed plus the logical coordinates of the task (fold index,
//! rotation, grid candidate, tree index, ...). Results are therefore
//! independent of scheduling and thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and logical task coordinates.
///
/// Stable across platforms and releases: no `std::hash` involvement.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base ^ 0x6a09_e667_f3bc_c908);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p));
    }
    state
}

/// Stable FNV-1a hash of a string, for deriving seeds from names.
pub fn stable_str_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic RNG seeded from a derived seed.
pub fn rng_from(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_deterministic_and_order_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2, 3]), derive_seed(7, &[1, 2, 3]));
        assert_ne!(derive_seed(7, &[1, 2, 3]), derive_seed(7, &[3, 2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
    }

    #[test]
    fn stable_str_hash_fixed_values() {
        // Pinned so seed derivation never silently changes.
        assert_eq!(stable_str_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_ne!(stable_str_hash("folds"), stable_str_hash("bootstrap"));
    }
}
