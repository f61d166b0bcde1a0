//! Seeded randomness. Every stochastic quantity in the crate flows from one
//! master `u64` seed through [`derive_seed`], so any sub-run (a matrix entry,
//! a drone's noise stream) can be reproduced in isolation.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derive the seed for logical stream `stream` of a master seed.
///
/// This is the SplitMix64 output function applied to
/// `master + (stream + 1) * GOLDEN_GAMMA`; documented in the README so
/// external tooling can reproduce sub-streams.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for a given seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample in `[0, 1)`, derived from the top 53 bits of one `u64`
/// draw so the mapping is stable across library versions.
pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform sample in `[-half_width, half_width)`.
pub fn symmetric(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    (2.0 * unit(rng) - 1.0) * half_width
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // stable values, frozen so the splitting rule cannot drift silently
        assert_eq!(derive_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn unit_stays_in_range_and_repeats() {
        let mut r1 = seeded(7);
        let mut r2 = seeded(7);
        for _ in 0..1000 {
            let x = unit(&mut r1);
            assert!((0.0..1.0).contains(&x));
            assert_eq!(x, unit(&mut r2));
        }
    }

    #[test]
    fn symmetric_bounds() {
        let mut rng = seeded(11);
        for _ in 0..1000 {
            let x = symmetric(&mut rng, 0.5);
            assert!((-0.5..0.5).contains(&x));
        }
        // zero half-width is exactly zero, no residual noise
        assert_eq!(symmetric(&mut rng, 0.0), 0.0);
    }
}
