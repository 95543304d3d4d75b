//! Seed derivation for independent random streams.
//!
//! Every random stream in an experiment is identified by a [`StreamId`]; its
//! seed is a SHA-256 digest of the master seed and the identifier, so streams
//! are independent of each other and of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Sampling synthetic inputs or subsampling ingested rows.
    Data,
    /// Shuffling rows into cross-validation folds.
    Split,
    /// Corrupting training targets.
    Noise,
    /// Initial network weights.
    Init,
    /// Mini-batch order during training.
    Shuffle,
}

impl Purpose {
    fn tag(self) -> &'static [u8] {
        match self {
            Purpose::Data => b"data",
            Purpose::Split => b"split",
            Purpose::Noise => b"noise",
            Purpose::Init => b"init",
            Purpose::Shuffle => b"shuffle",
        }
    }
}

/// Coordinates of a stream within one experiment. `None` marks a stream shared
/// across that coordinate (e.g. weight init shared by all models of a cell).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamId {
    pub replicate: usize,
    pub fold: Option<usize>,
    pub model: Option<usize>,
    pub purpose: Purpose,
}

impl StreamId {
    pub fn new(replicate: usize, fold: Option<usize>, model: Option<usize>, purpose: Purpose) -> Self {
        StreamId {
            replicate,
            fold,
            model,
            purpose,
        }
    }

    pub fn seed(&self, master: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(b"cauchy-bench/v1");
        h.update(master.to_le_bytes());
        h.update((self.replicate as u64).to_le_bytes());
        for part in [self.fold, self.model] {
            match part {
                Some(v) => {
                    h.update([1u8]);
                    h.update((v as u64).to_le_bytes());
                }
                None => h.update([0u8]),
            }
        }
        h.update(self.purpose.tag());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Derives a child seed from a parent seed and a label.
pub fn child_seed(parent: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// The generator used for every stream in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
