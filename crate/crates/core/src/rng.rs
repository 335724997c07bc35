//! Seed derivation. Every random draw in the crate comes from a ChaCha
//! stream whose seed is a pure function of the run seed and a path of
//! indices, so results do not depend on evaluation order or threading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of stream indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn stream(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, path))
}

// Stream tags, so that sibling consumers never share a stream.
pub(crate) const TAG_OBS: u64 = 1;
pub(crate) const TAG_FIT: u64 = 2;
pub(crate) const TAG_DESIGN: u64 = 3;
pub(crate) const TAG_OUTCOME: u64 = 4;
pub(crate) const TAG_STRATEGY: u64 = 5;
