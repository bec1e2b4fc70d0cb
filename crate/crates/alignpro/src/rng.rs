//! Deterministic, splittable randomness.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose key
//! is SHA-256 of (master seed, tag). Substreams are independent by tag, so
//! parallel workers can own their own generators and still reproduce the
//! serial run byte for byte.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Algorithm identifier pinned into instance metadata.
pub const GENERATOR_VERSION: &str = "chacha8/sha256-derive/v1";

/// Derives an independent generator from a master seed and a field tag.
pub fn derive_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, for handing whole sub-experiments to workers.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
