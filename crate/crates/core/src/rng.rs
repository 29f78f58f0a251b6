//! Deterministic random streams keyed by a base seed and a path of indices.
//!
//! Every replicate (Monte Carlo dataset, bootstrap resample) draws from its own
//! stream, so results do not depend on the order in which replicates execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with each element of `path` into a single 64-bit key.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x51_7CC1_B727_220A))))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

// Stream tags used across the crate.
pub(crate) const TAG_MONITORS: u64 = 1;
pub(crate) const TAG_SUBJECTS: u64 = 2;
pub(crate) const TAG_HEALTH_NOISE: u64 = 3;
pub(crate) const TAG_BOOTSTRAP: u64 = 4;
pub(crate) const TAG_SURFACE: u64 = 5;
pub(crate) const TAG_COVARIATE_FIELD: u64 = 6;
pub(crate) const TAG_REPLICATE: u64 = 7;
