//! Named, splittable seed derivation.
//!
//! All randomness flows from one root seed. Child seeds are derived by
//! hashing the parent state together with a label, so adding a new consumer
//! never perturbs the streams of existing ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedTree {
    state: [u8; 32],
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"microlocal/root");
        h.update(seed.to_le_bytes());
        Self {
            state: h.finalize().into(),
        }
    }

    pub fn derive(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.state);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        Self {
            state: h.finalize().into(),
        }
    }

    pub fn derive_index(&self, label: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.state);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Self {
            state: h.finalize().into(),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.state)
    }

    /// A 64-bit digest, handy for cheap hash-based masks.
    pub fn as_u64(&self) -> u64 {
        u64::from_le_bytes(self.state[..8].try_into().unwrap())
    }
}
