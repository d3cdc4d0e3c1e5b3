//! Exact brute-force vector index over chunks.
//!
//! Scores are "higher is better" for every metric: similarity for cosine and
//! inner product, negated distance for squared L2. Results are ordered by
//! score descending, ties broken by `chunk_id` ascending.

mod persist;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::ChunkMetadata;
use crate::embeddings::{dot_f64, squared_l2_f64, EmbeddingVector};

pub use persist::{ENTRIES_FILE, FORMAT_VERSION, MANIFEST_FILE, VECTORS_FILE};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("dimension mismatch: index has {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("duplicate chunk id {0:?}")]
    DuplicateId(String),
    #[error("zero vector for {0:?} cannot be indexed under the cosine metric")]
    ZeroVector(String),
    #[error("unknown metric {0:?} (expected cosine, inner_product or squared_l2)")]
    UnknownMetric(String),
    #[error("unsupported index format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch in {file}")]
    Checksum { file: String },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cosine,
    InnerProduct,
    SquaredL2,
}

impl FromStr for Metric {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "inner_product" | "ip" => Ok(Self::InnerProduct),
            "squared_l2" | "l2" => Ok(Self::SquaredL2),
            other => Err(StoreError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cosine => "cosine",
            Self::InnerProduct => "inner_product",
            Self::SquaredL2 => "squared_l2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub dim: usize,
    pub metric: Metric,
    pub count: usize,
    pub format_version: u32,
    /// Embedder descriptor the vectors were produced with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<String>,
    /// Corpus directory holding the chunk texts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<String>,
    #[serde(default)]
    pub entries_crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chunk_id: String,
    pub vector: EmbeddingVector,
    pub metadata: ChunkMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
    pub metadata: ChunkMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct EntryRecord {
    pub chunk_id: String,
    pub metadata: ChunkMetadata,
}

#[derive(Debug, Clone)]
pub struct VectorIndex {
    dim: usize,
    metric: Metric,
    embedder: Option<String>,
    corpus_dir: Option<String>,
    records: Vec<EntryRecord>,
    /// Row-major `count × dim`.
    vectors: Vec<f32>,
    ids: HashSet<String>,
}

impl VectorIndex {
    pub fn new(dim: usize, metric: Metric) -> Self {
        Self {
            dim,
            metric,
            embedder: None,
            corpus_dir: None,
            records: Vec::new(),
            vectors: Vec::new(),
            ids: HashSet::new(),
        }
    }

    pub fn with_provenance(mut self, embedder: Option<String>, corpus_dir: Option<String>) -> Self {
        self.embedder = embedder;
        self.corpus_dir = corpus_dir;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn embedder(&self) -> Option<&str> {
        self.embedder.as_deref()
    }

    pub fn corpus_dir(&self) -> Option<&str> {
        self.corpus_dir.as_deref()
    }

    pub fn manifest(&self) -> IndexManifest {
        IndexManifest {
            dim: self.dim,
            metric: self.metric,
            count: self.len(),
            format_version: FORMAT_VERSION,
            embedder: self.embedder.clone(),
            corpus_dir: self.corpus_dir.clone(),
            entries_crc32: 0,
        }
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.ids.contains(chunk_id)
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn entries(&self) -> impl Iterator<Item = IndexEntry> + '_ {
        self.records.iter().enumerate().map(|(row, r)| IndexEntry {
            chunk_id: r.chunk_id.clone(),
            vector: EmbeddingVector::new(self.vector(row).to_vec()).expect("stored vectors are finite"),
            metadata: r.metadata.clone(),
        })
    }

    /// Appends entries, all or nothing. Returns the new count.
    pub fn add(&mut self, entries: Vec<IndexEntry>) -> Result<usize, StoreError> {
        let mut batch_ids = HashSet::new();
        for e in &entries {
            if e.vector.dim() != self.dim {
                return Err(StoreError::DimMismatch {
                    expected: self.dim,
                    got: e.vector.dim(),
                });
            }
            if self.ids.contains(&e.chunk_id) || !batch_ids.insert(e.chunk_id.as_str()) {
                return Err(StoreError::DuplicateId(e.chunk_id.clone()));
            }
            if self.metric == Metric::Cosine && e.vector.norm() == 0.0 {
                return Err(StoreError::ZeroVector(e.chunk_id.clone()));
            }
        }
        for e in entries {
            self.vectors.extend_from_slice(e.vector.as_slice());
            self.ids.insert(e.chunk_id.clone());
            self.records.push(EntryRecord {
                chunk_id: e.chunk_id,
                metadata: e.metadata,
            });
        }
        Ok(self.len())
    }

    fn score(&self, query: &[f32], query_norm: f64, row: usize) -> f64 {
        let v = self.vector(row);
        match self.metric {
            Metric::InnerProduct => dot_f64(query, v),
            Metric::SquaredL2 => -squared_l2_f64(query, v),
            Metric::Cosine => {
                let norm = dot_f64(v, v).sqrt();
                (dot_f64(query, v) / (query_norm * norm)).clamp(-1.0, 1.0)
            }
        }
    }

    /// Exact top-`k` by full scan. `k` larger than the index returns
    /// everything.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, StoreError> {
        if query.dim() != self.dim {
            return Err(StoreError::DimMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        let k = k.min(self.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        let q = query.as_slice();
        let q_norm = query.norm();
        if self.metric == Metric::Cosine && q_norm == 0.0 {
            return Err(StoreError::ZeroVector("query".into()));
        }

        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .map(|row| (self.score(q, q_norm, row), row))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0)
                .then_with(|| self.records[a.1].chunk_id.cmp(&self.records[b.1].chunk_id))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);

        Ok(scored
            .into_iter()
            .map(|(score, row)| SearchHit {
                chunk_id: self.records[row].chunk_id.clone(),
                score,
                metadata: self.records[row].metadata.clone(),
            })
            .collect())
    }
}
