//! Seed derivation for named random streams.
//!
//! A single master seed fans out into independent streams keyed by a label
//! and an index path (e.g. `("env-pop", [generation, actor])`). Streams are
//! derived by hashing, not by drawing from a shared generator, so skipping a
//! component (no population, no noise, ...) never shifts the randomness seen
//! by the others, and parallel workers can derive their streams locally in
//! any order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Master seed plus derivation helpers for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// A stream identified by label alone.
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        self.stream_at(label, &[])
    }

    /// A stream identified by label and index path.
    pub fn stream_at(&self, label: &str, path: &[u64]) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(label.as_bytes());
        for ix in path {
            hasher.update([0u8]);
            hasher.update(ix.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}
