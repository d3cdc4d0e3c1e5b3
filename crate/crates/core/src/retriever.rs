//! Dense retrieval: embed the cleaned question with the corpus embedder and
//! return the top-k chunks with their text.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, Chunk, ChunkMetadata, CorpusError, CorpusStore};
use crate::embeddings::{EmbedError, Embedder};
use crate::vector_store::{IndexEntry, Metric, StoreError, VectorIndex};

pub const DEFAULT_K: usize = 3;

/// Chunks embedded per call while building an index.
const BUILD_BATCH: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum RetrieveError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("index and corpus out of sync: no text for chunk {0:?}")]
    MissingChunk(String),
    #[error("chunk {0:?} has no source url")]
    MissingSource(String),
    #[error("index was built with embedder {index:?} but the query embedder is {query:?}")]
    EmbedderMismatch { index: String, query: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedHit {
    pub chunk_id: String,
    pub score: f64,
    pub metadata: ChunkMetadata,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub question: String,
    pub k_requested: usize,
    pub hits: Vec<RetrievedHit>,
    /// Set when the index held no entries at all.
    #[serde(default)]
    pub empty_index: bool,
}

impl RetrievedContext {
    pub fn empty(question: impl Into<String>, k: usize) -> Self {
        Self {
            question: question.into(),
            k_requested: k,
            hits: Vec::new(),
            empty_index: true,
        }
    }

    pub fn source_urls(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.metadata.source_url.as_str()).collect()
    }
}

/// Embeds every chunk and builds an index over them.
pub fn build_index(
    chunks: &[Chunk],
    embedder: &dyn Embedder,
    metric: Metric,
) -> Result<VectorIndex, RetrieveError> {
    let mut index = VectorIndex::new(embedder.dim(), metric)
        .with_provenance(Some(embedder.descriptor()), None);
    for batch in chunks.chunks(BUILD_BATCH) {
        let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
        let vectors = embedder.embed(&texts)?;
        let entries = batch
            .iter()
            .zip(vectors)
            .map(|(c, vector)| IndexEntry {
                chunk_id: c.chunk_id.clone(),
                vector,
                metadata: c.metadata.clone(),
            })
            .collect();
        index.add(entries)?;
    }
    Ok(index)
}

/// Builds an index over every chunk in `corpus` and writes it to `out`.
/// The manifest records the corpus directory so `Retriever::open` can find
/// the chunk texts again.
pub fn index_corpus(
    corpus: &CorpusStore,
    embedder: &dyn Embedder,
    metric: Metric,
    out: &Path,
) -> Result<VectorIndex, RetrieveError> {
    let corpus_dir = std::fs::canonicalize(corpus.dir()).unwrap_or_else(|_| corpus.dir().to_path_buf());
    let index = build_index(corpus.chunks(), embedder, metric)?
        .with_provenance(Some(embedder.descriptor()), Some(corpus_dir.display().to_string()));
    index.persist(out)?;
    Ok(index)
}

/// Stateless over an immutable index snapshot; safe to share across threads.
pub struct Retriever {
    index: Arc<VectorIndex>,
    texts: HashMap<String, String>,
    embedder: Arc<dyn Embedder>,
    default_k: usize,
    calls: AtomicUsize,
}

impl Retriever {
    pub fn new(
        index: Arc<VectorIndex>,
        chunks: impl IntoIterator<Item = Chunk>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, RetrieveError> {
        if let Some(built_with) = index.embedder() {
            let query = embedder.descriptor();
            if built_with != query {
                return Err(RetrieveError::EmbedderMismatch {
                    index: built_with.to_string(),
                    query,
                });
            }
        }
        if index.dim() != embedder.dim() {
            return Err(StoreError::DimMismatch {
                expected: index.dim(),
                got: embedder.dim(),
            }
            .into());
        }
        Ok(Self {
            index,
            texts: chunks.into_iter().map(|c| (c.chunk_id, c.text)).collect(),
            embedder,
            default_k: DEFAULT_K,
            calls: AtomicUsize::new(0),
        })
    }

    /// Loads the index at `index_dir` and chunk texts from `corpus_dir`, or
    /// from the corpus recorded in the index manifest when `None`.
    pub fn open(
        index_dir: &Path,
        corpus_dir: Option<&Path>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, RetrieveError> {
        let index = VectorIndex::load(index_dir)?;
        let corpus_dir = match corpus_dir {
            Some(p) => p.to_path_buf(),
            None => index
                .corpus_dir()
                .map(Into::into)
                .unwrap_or_else(|| index_dir.to_path_buf()),
        };
        let corpus = CorpusStore::open(corpus_dir)?;
        Self::new(Arc::new(index), corpus.chunks().to_vec(), embedder)
    }

    pub fn with_default_k(mut self, k: usize) -> Self {
        self.default_k = k;
        self
    }

    pub fn default_k(&self) -> usize {
        self.default_k
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn chunk_text(&self, chunk_id: &str) -> Option<&str> {
        self.texts.get(chunk_id).map(String::as_str)
    }

    /// Number of `retrieve` calls served so far.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn retrieve_default(&self, question: &str) -> Result<RetrievedContext, RetrieveError> {
        self.retrieve(question, self.default_k)
    }

    pub fn retrieve(&self, question: &str, k: usize) -> Result<RetrievedContext, RetrieveError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let cleaned = clean_text(question);
        if cleaned.is_empty() {
            return Err(RetrieveError::EmptyQuestion);
        }
        if self.index.is_empty() {
            return Ok(RetrievedContext::empty(question, k));
        }
        let query = self.embedder.embed_one(&cleaned)?;
        let hits = self
            .index
            .search(&query, k)?
            .into_iter()
            .map(|hit| {
                let text = self
                    .texts
                    .get(&hit.chunk_id)
                    .filter(|t| !t.is_empty())
                    .ok_or_else(|| RetrieveError::MissingChunk(hit.chunk_id.clone()))?;
                if hit.metadata.source_url.is_empty() {
                    return Err(RetrieveError::MissingSource(hit.chunk_id));
                }
                Ok(RetrievedHit {
                    text: text.clone(),
                    chunk_id: hit.chunk_id,
                    score: hit.score,
                    metadata: hit.metadata,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RetrievedContext {
            question: question.to_string(),
            k_requested: k,
            hits,
            empty_index: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{chunk_document, DocFormat, SourceDocument, SourceType};
    use crate::embeddings::HashEmbedder;

    fn corpus() -> Vec<Chunk> {
        let texts = [
            "Hospice care focuses on comfort and pain management at the end of life.",
            "Wandering is common in dementia; secure doors and consider alarms.",
            "A durable power of attorney lets a trusted person make financial decisions.",
            "Caregiver support groups reduce stress and isolation.",
        ];
        texts
            .iter()
            .enumerate()
            .flat_map(|(i, t)| {
                let doc = SourceDocument::new(
                    format!("https://kb.example/{i}"),
                    SourceType::Guideline,
                    DocFormat::Plain,
                    *t,
                );
                chunk_document(&doc, &doc.clean(), 1200)
            })
            .collect()
    }

    fn retriever(chunks: &[Chunk]) -> Retriever {
        let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256));
        let index = build_index(chunks, embedder.as_ref(), Metric::Cosine).unwrap();
        Retriever::new(Arc::new(index), chunks.to_vec(), embedder).unwrap()
    }

    #[test]
    fn identical_question_ranks_its_chunk_first() {
        let chunks = corpus();
        let r = retriever(&chunks);
        let ctx = r.retrieve(&chunks[1].text, 3).unwrap();
        assert_eq!(ctx.hits.len(), 3);
        assert_eq!(ctx.hits[0].chunk_id, chunks[1].chunk_id);
        assert!((ctx.hits[0].score - 1.0).abs() <= 1e-6);
        assert_eq!(r.call_count(), 1);
    }

    #[test]
    fn empty_question_is_rejected() {
        let r = retriever(&corpus());
        assert!(matches!(r.retrieve("  \n", 3), Err(RetrieveError::EmptyQuestion)));
    }

    #[test]
    fn empty_index_yields_flagged_context() {
        let r = retriever(&[]);
        let ctx = r.retrieve("anything?", 3).unwrap();
        assert!(ctx.hits.is_empty());
        assert!(ctx.empty_index);
    }

    #[test]
    fn missing_chunk_text_is_out_of_sync() {
        let chunks = corpus();
        let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256));
        let index = build_index(&chunks, embedder.as_ref(), Metric::Cosine).unwrap();
        let r = Retriever::new(Arc::new(index), chunks[1..].to_vec(), embedder).unwrap();
        let err = r.retrieve(&chunks[0].text, 1).unwrap_err();
        assert!(matches!(err, RetrieveError::MissingChunk(_)));
    }

    #[test]
    fn embedder_mismatch_is_caught() {
        let chunks = corpus();
        let index = build_index(&chunks, &HashEmbedder::new(256), Metric::Cosine).unwrap();
        let other: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(128));
        assert!(Retriever::new(Arc::new(index), chunks, other).is_err());
    }
}
