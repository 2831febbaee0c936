//! Deterministic seed streams.
//!
//! A single master seed fans out into independent child seeds by mixing in
//! stream identifiers with the SplitMix64 finalizer. Every random draw in the
//! crate goes through a `ChaCha8Rng` seeded this way, so results depend only
//! on the seeds and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of stream identifiers.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master.wrapping_add(GOLDEN)), |acc, &id| {
        mix(acc ^ mix(id.wrapping_add(GOLDEN)))
    })
}

pub fn rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}

/// Well-known stream identifiers, kept in one place so that no two
/// consumers accidentally share a stream.
pub mod stream {
    pub const SUB_MODEL: u64 = 1;
    pub const FEATURE_SELECTION: u64 = 2;
    pub const RANDOM_WEIGHTS: u64 = 3;
    pub const FEATURE_SHUFFLE: u64 = 4;
    pub const FEATURE_DRAW: u64 = 5;
    pub const NOISE_FEATURES: u64 = 6;
    pub const NOISE_SAMPLES: u64 = 7;
    pub const NOISE_LABELS: u64 = 8;
    pub const TRAIN_SPLIT: u64 = 9;
    pub const TEST_SPLIT: u64 = 10;
    pub const COEFFICIENTS: u64 = 11;
}
