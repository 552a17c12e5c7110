//! Deterministic seed derivation.
//!
//! Every random quantity in a run is keyed by `(repeat seed, purpose, index)`
//! so that changing one knob never shifts the random stream of another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a derived seed is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    InitialDesign = 1,
    Fit = 2,
    IsSample = 3,
    ZSample = 4,
    XDisc = 5,
    Rff = 6,
    Restarts = 7,
    Recommend = 8,
    Score = 9,
    Problem = 10,
    Baseline = 11,
}

/// Derives a sub-seed from a base seed, a purpose and an index (usually the
/// BO iteration).
#[inline]
pub fn derive(base: u64, purpose: Purpose, index: u64) -> u64 {
    mix64(mix64(base ^ (purpose as u64).wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

/// A seeded pseudo-random generator for the non-qMC randomness.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purposes_and_indices_separate_streams() {
        let a = derive(5, Purpose::Fit, 0);
        assert_ne!(a, derive(5, Purpose::Fit, 1));
        assert_ne!(a, derive(5, Purpose::Rff, 0));
        assert_ne!(a, derive(6, Purpose::Fit, 0));
        assert_eq!(a, derive(5, Purpose::Fit, 0));
    }
}
