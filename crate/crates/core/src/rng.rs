//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit `u64` seed. Independent
//! consumers of the same seed (per-tree bootstraps, per-epoch shuffles) use
//! distinct ChaCha stream ids so their draws never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used across the crate.
pub(crate) mod streams {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const HOLDOUT: u64 = 5;
    pub const NEGATIVES: u64 = 6;
    pub const EVAL_NEGATIVES: u64 = 7;
    pub const RECOMMEND: u64 = 8;
    pub const PCA: u64 = 9;
    /// Forest trees use `TREE_BASE + tree_index`.
    pub const TREE_BASE: u64 = 1 << 32;
}
