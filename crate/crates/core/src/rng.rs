//! Seeded randomness.
//!
//! Every random draw in the harness comes from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`), which produces the same sequence on every
//! platform. Child seeds are derived by hashing the parent seed with a list
//! of coordinate labels through SHA-256, so a cell's randomness depends on
//! *what* it is (dataset, model, bootstrap index), never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from `base` and a path of coordinate labels.
pub fn derive_seed<S: AsRef<str>>(base: u64, parts: &[S]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in parts {
        let bytes = part.as_ref().as_bytes();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// Shorthand for a derivation keyed by a single integer index.
pub fn derive_indexed(base: u64, label: &str, index: usize) -> u64 {
    derive_seed(base, &[label, &index.to_string()])
}

/// Indices of a size-`n` resample with replacement.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::Rng as _;
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
