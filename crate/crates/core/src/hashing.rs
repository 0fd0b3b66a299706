//! Content hashes used for cache keys, provenance, and per-target seeds.

use sha2::{Digest, Sha256};

/// SHA-256 over length-prefixed parts, hex encoded.
///
/// Length prefixes keep `("ab", "c")` and `("a", "bc")` distinct.
pub fn digest_parts<I, P>(parts: I) -> String
where
    I: IntoIterator<Item = P>,
    P: AsRef<[u8]>,
{
    let mut hasher = Sha256::new();
    for part in parts {
        let bytes = part.as_ref();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    hex::encode(hasher.finalize())
}

pub fn digest(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Seed for one target, independent of scheduling: `hash(experiment_seed ‖ target_id)`.
pub fn derive_seed(experiment_seed: u64, target_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(experiment_seed.to_le_bytes());
    hasher.update(target_id.as_bytes());
    let out = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&out[..8]);
    u64::from_le_bytes(word)
}
