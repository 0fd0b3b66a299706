//! Sentence embeddings, pluggable embedder backends, and exact cosine retrieval.

mod backend;
mod index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use backend::{Embedder, EmbedderBackend, EmbedderStats, MockEmbedder, RemoteEmbedder};
pub use index::{EmbeddingIndex, Hit};

/// Dimension of the sentence-embedding space.
pub const DEFAULT_DIMENSION: usize = 384;

/// Maximum allowed deviation of a stored vector's L2 norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Unit-normalized embedding stored at precision `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding<T> {
    components: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    /// Normalizes `raw` (in `f64`) and stores it at precision `T`.
    pub fn normalized<S: Scalar>(raw: &[S]) -> Result<Self> {
        let norm = raw.iter().map(|x| x.widen() * x.widen()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::DegenerateVector);
        }
        Ok(Embedding {
            components: raw.iter().map(|x| T::narrow(x.widen() / norm)).collect(),
        })
    }

    /// Wraps components that are already unit-norm, checking the norm.
    pub fn from_unit(components: Vec<T>) -> Result<Self> {
        let e = Embedding { components };
        if (e.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::DegenerateVector);
        }
        Ok(e)
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Inner product accumulated in `f64`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.widen() * b.widen())
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> Embedding<U> {
        Embedding {
            components: self.components.iter().map(|x| U::narrow(x.widen())).collect(),
        }
    }
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0)
}
