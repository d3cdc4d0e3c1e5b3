//! Embedding vectors, the three distance functions, and embedders.
//!
//! Vectors are stored as `f32` (the on-disk index format) and every
//! reduction accumulates in `f64`. Embedders return L2-normalized vectors,
//! so cosine similarity and inner product agree on their output.

mod hashing;
mod provider;

use serde::{Deserialize, Serialize};

pub use hashing::{deterministic_embed, fnv1a64, HashEmbedder};
pub use provider::{
    embed_texts, BatchProvider, EmbeddingProviderConfig, HttpEmbeddingProvider, ProviderEmbedder,
};

pub const DEFAULT_DIM: usize = 768;

/// Tolerance on `|‖v‖ − 1|` for a vector to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("unembeddable empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vector contains a non-finite value")]
    NonFinite,
    #[error("embedding request failed (retriable): {0}")]
    Transport(String),
    #[error("embedding endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed embedding response: {0}")]
    Protocol(String),
}

impl EmbedError {
    pub fn is_retriable(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Scales to unit length. Vectors already within [`NORM_TOLERANCE`] of
    /// unit length are returned unchanged, which makes this idempotent.
    pub fn normalized(self) -> Result<Self, EmbedError> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        if (norm - 1.0).abs() <= NORM_TOLERANCE {
            return Ok(self);
        }
        let values = self
            .values
            .iter()
            .map(|&v| (f64::from(v) / norm) as f32)
            .collect();
        Ok(Self { values })
    }
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(), EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

pub(crate) fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub(crate) fn squared_l2_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

pub fn inner_product(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    check_dims(a, b)?;
    Ok(dot_f64(a.as_slice(), b.as_slice()))
}

pub fn squared_l2(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    check_dims(a, b)?;
    Ok(squared_l2_f64(a.as_slice(), b.as_slice()))
}

/// `dot(a, b) / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    check_dims(a, b)?;
    let (a, b) = (a.as_slice(), b.as_slice());
    let denom = (dot_f64(a, a) * dot_f64(b, b)).sqrt();
    if denom == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot_f64(a, b) / denom).clamp(-1.0, 1.0))
}

/// Turns texts into normalized vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// One vector per input, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    /// Short identifier recorded in index manifests, e.g. `hash-3gram:768`.
    fn descriptor(&self) -> String;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| EmbedError::Protocol("embedder returned no vector".into()))
    }
}
