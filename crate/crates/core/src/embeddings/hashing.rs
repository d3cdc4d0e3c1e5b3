//! Deterministic offline embedder: signed feature hashing of character
//! 3-grams.
//!
//! Each 3-gram (three consecutive Unicode scalar values) is hashed with
//! 64-bit FNV-1a over its UTF-8 bytes. The bucket is `hash % dim` and the
//! sign is `+1` when bit 63 is clear, `-1` otherwise. Texts shorter than
//! three characters contribute one gram: the whole text. Counts accumulate
//! in `f64` in text order and the result is L2-normalized.

use super::{EmbedError, Embedder, EmbeddingVector, DEFAULT_DIM};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GRAM: usize = 3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

pub fn deterministic_embed(text: &str, dim: usize) -> Result<EmbeddingVector, EmbedError> {
    if text.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let dim = dim.max(1);
    let chars: Vec<char> = text.chars().collect();
    let mut acc = vec![0.0f64; dim];

    let mut add = |gram: &[char]| {
        let s: String = gram.iter().collect();
        let h = fnv1a64(s.as_bytes());
        let bucket = (h % dim as u64) as usize;
        acc[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    };
    if chars.len() < GRAM {
        add(&chars);
    } else {
        chars.windows(GRAM).for_each(&mut add);
    }

    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every gram cancelled out against another of opposite sign
        let mut values = vec![0.0f32; dim];
        values[(fnv1a64(text.as_bytes()) % dim as u64) as usize] = 1.0;
        return EmbeddingVector::new(values);
    }
    EmbeddingVector::new(acc.iter().map(|v| (v / norm) as f32).collect())
}

/// [`Embedder`] backed by [`deterministic_embed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| deterministic_embed(t, self.dim))
            .collect()
    }

    fn descriptor(&self) -> String {
        format!("hash-3gram:{}", self.dim)
    }
}
