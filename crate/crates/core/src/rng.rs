//! Seed derivation shared by every stochastic component.
//!
//! All randomness flows from a root `u64` through [`derive_seed`], so any
//! sub-stream can be reconstructed from the root seed and a short path of
//! integers without threading RNG state between components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used everywhere in the crate.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `root` with each element of `path` into a new seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(root: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(root, path))
}

// Stream tags used with `derive_seed`.
pub(crate) const TAG_RESET: u64 = 0x5245_5345;
pub(crate) const TAG_ROLLOUT: u64 = 0x524f_4c4c;
pub(crate) const TAG_RESAMPLE: u64 = 0x5253_4d50;
pub(crate) const TAG_SELECT: u64 = 0x5345_4c45;
pub(crate) const TAG_MC: u64 = 0x4d43_4d43;
pub(crate) const TAG_BEHAVIOR: u64 = 0x4245_4856;
pub(crate) const TAG_EVAL: u64 = 0x4556_414c;
