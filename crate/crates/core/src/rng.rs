//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 keyed by a 64-bit seed. Each consumer
//! draws from its own stream id, so the measurement matrix, the noise and the
//! synthetic data of one trial never share a keystream even when they are
//! keyed by the same seed.
//!
//! Per-trial seeds are derived with SHA-256 over the little-endian base seed,
//! a length-prefixed label, the little-endian indices and a length-prefixed
//! tag; the first eight digest bytes (little-endian) form the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// Stream ids for the ChaCha20 generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Measurement matrix entries.
    Map = 1,
    /// Additive measurement noise.
    Noise = 2,
    /// Synthetic ground-truth tensors.
    Data = 3,
    /// Random probes (RIC estimation, perturbation checks).
    Probe = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Derives a child seed from `base`, a label, integer coordinates and a tag.
pub fn derive_seed(base: u64, label: &str, indices: &[u64], tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update((indices.len() as u64).to_le_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// `len` independent standard normal draws.
pub fn standard_normals(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}
