//! Seed derivation for independent random streams.
//!
//! Every stream is a `ChaCha8Rng` seeded with a 64-bit value obtained by
//! folding the stream coordinates into the base seed with the SplitMix64
//! finalizer: `h = mix(base); for c in coords { h = mix(h ^ mix(c + GOLDEN)) }`.
//! Golden values in tests depend on this exact function.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix64(base), |h, &c| {
        mix64(h ^ mix64(c.wrapping_add(GOLDEN)))
    })
}

pub fn stream(base: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, coords))
}
