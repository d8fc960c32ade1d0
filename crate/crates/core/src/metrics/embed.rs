//! Embedder interface and the bundled deterministic test embedder.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("embedder {embedder} failed on {input:?}: {message}")]
    Failure {
        embedder: String,
        input: String,
        message: String,
    },
    #[error("embedder {0} does not support image inputs")]
    ImagesUnsupported(String),
}

/// Maps texts (and, for image-capable embedders, image references) to
/// fixed-dimensional vectors.
///
/// Identical input must yield an identical vector within one session,
/// and all entries must be finite. Implementations must either be safe
/// for concurrent `embed` calls or say otherwise in their docs so the
/// caller can serialize access.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;
    fn embed_image(&self, _image_ref: &str) -> Result<Vec<f32>, EmbedError> {
        Err(EmbedError::ImagesUnsupported(self.name().to_string()))
    }
}

/// Deterministic test embedder: each input hashes to a seed driving a
/// portable PRNG that emits a unit vector. Identical inputs give
/// identical vectors on every platform; distinct inputs give unrelated
/// directions. Safe for concurrent calls (no interior state).
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "hash embedder needs dim >= 2");
        HashEmbedder { dim }
    }

    fn vector_for(&self, key: &str) -> Vec<f32> {
        let digest = Sha256::digest(key.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha12Rng::from_seed(seed);
        let mut v: Vec<f32> = (0..self.dim)
            .map(|_| rng.gen_range(-1.0f32..1.0f32))
            .collect();
        let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x = (*x as f64 / norm) as f32;
            }
        } else {
            v[0] = 1.0;
        }
        v
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(64)
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "hash-test"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        Ok(self.vector_for(&format!("text:{text}")))
    }

    fn embed_image(&self, image_ref: &str) -> Result<Vec<f32>, EmbedError> {
        Ok(self.vector_for(&format!("image:{image_ref}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashEmbedder::default();
        let a = e.embed("three cats").unwrap();
        let b = e.embed("three cats").unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
        assert_ne!(a, e.embed("two cats").unwrap());
        // image namespace is distinct from text namespace
        assert_ne!(a, e.embed_image("three cats").unwrap());
    }
}
