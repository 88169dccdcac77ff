//! Seed fan-out.
//!
//! Every random stream in a run is derived from the master seed and a
//! path of small integers (a stream tag plus, e.g., a client id or round
//! index). Derivation folds each path element through SplitMix64, so a
//! stream depends only on its own path: adding a client never perturbs the
//! streams of existing clients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used by the engine and the pipeline.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const MODEL_INIT: u64 = 3;
    pub const CLIENT: u64 = 4;
    pub const STANDALONE: u64 = 5;
    pub const ANNEAL: u64 = 6;
    pub const PARTICIPATION: u64 = 7;
    pub const NOISE: u64 = 8;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of stream identifiers.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, path))
}
