//! Per-component random streams derived from a single master seed.
//!
//! Every stochastic component of a run (environment, weight init, exploration,
//! replay sampling, evaluation) draws from its own stream so that changing how
//! often one component consumes randomness never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels used by the training loop.
pub mod label {
    pub const ENV: &str = "env";
    pub const INIT: &str = "init";
    pub const EXPLORE: &str = "explore";
    pub const REPLAY: &str = "replay";
    pub const EVAL: &str = "eval";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed from `master` and a fixed label (FNV-1a over the label).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}

pub fn stream(master: u64, label: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(master, label))
}
