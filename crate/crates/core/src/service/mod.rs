//! The question-answering service: a synchronous engine over an index
//! snapshot, plus the HTTP routes in [`http`].
//!
//! Each request reads the current snapshot once and works only with it.
//! Re-ingesting builds a new index and swaps the snapshot in whole, so a
//! request never sees a half-built index.

mod http;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::citations::{audit, parse_answer, Reference, ReferenceAudit};
use crate::config::{AppConfig, ConfigError};
use crate::corpus::{CorpusError, CorpusStore, IngestInput, IngestOptions, IngestReport, SourceType};
use crate::embeddings::Embedder;
use crate::llm_client::{GenerateError, Generator};
use crate::prompt::PromptBuilder;
use crate::retriever::{index_corpus, RetrieveError, Retriever, DEFAULT_K};
use crate::vector_store::Metric;

pub use http::{router, serve};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskRequest {
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
}

pub type SearchRequest = AskRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub source_url: String,
    pub score: f64,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
    pub references: Vec<Reference>,
    pub hits: Vec<Hit>,
    pub audit: ReferenceAudit,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub index_count: usize,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub paths: Vec<String>,
    #[serde(default = "default_source_type")]
    pub source_type: SourceType,
}

fn default_source_type() -> SourceType {
    SourceType::WebArticle
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestResponse {
    #[serde(flatten)]
    pub report: IngestReport,
    pub index_count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("index not loaded")]
    IndexNotLoaded,
    #[error("{0}")]
    Backend(String),
    /// Every input of an ingest request failed; nothing changed.
    #[error("no inputs could be ingested")]
    IngestFailed(IngestReport),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadRequest(_) => "bad_request",
            Self::IndexNotLoaded => "index_not_loaded",
            Self::Backend(_) => "backend_failure",
            Self::IngestFailed(_) => "ingest_failed",
            Self::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            Self::BadRequest(_) => 400,
            Self::IndexNotLoaded => 503,
            Self::Backend(_) => 502,
            Self::IngestFailed(_) => 207,
            Self::Internal(_) => 500,
        }
    }
}

impl From<RetrieveError> for ServiceError {
    fn from(e: RetrieveError) -> Self {
        match e {
            RetrieveError::EmptyQuestion => Self::BadRequest(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}

impl From<GenerateError> for ServiceError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::Config(_) => Self::Internal(e.to_string()),
            other => Self::Backend(other.to_string()),
        }
    }
}

/// Where `/api/ingest` writes.
#[derive(Debug, Clone)]
pub struct IngestTarget {
    pub corpus_dir: PathBuf,
    pub index_dir: PathBuf,
    pub metric: Metric,
    pub options: IngestOptions,
}

pub struct ServiceState {
    snapshot: RwLock<Option<Arc<Retriever>>>,
    generator: Arc<dyn Generator>,
    embedder: Arc<dyn Embedder>,
    prompts: PromptBuilder,
    k: usize,
    snippet_chars: usize,
    ingest: Option<IngestTarget>,
    ingest_lock: Mutex<()>,
}

impl ServiceState {
    pub fn new(
        generator: Arc<dyn Generator>,
        embedder: Arc<dyn Embedder>,
        retriever: Option<Retriever>,
        prompts: PromptBuilder,
    ) -> Self {
        Self {
            snapshot: RwLock::new(retriever.map(Arc::new)),
            generator,
            embedder,
            prompts,
            k: DEFAULT_K,
            snippet_chars: 300,
            ingest: None,
            ingest_lock: Mutex::new(()),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_snippet_chars(mut self, n: usize) -> Self {
        self.snippet_chars = n;
        self
    }

    pub fn with_ingest(mut self, target: IngestTarget) -> Self {
        self.ingest = Some(target);
        self
    }

    /// Builds the state from a config file. A missing index directory is
    /// not an error: the service starts without one, `/api/ask` answers
    /// 503, and `/api/ingest` can create it.
    pub fn from_config(config: &AppConfig) -> Result<Self, ConfigError> {
        config.service.listen_addr()?;
        if let Some(dir) = &config.service.static_dir {
            if !dir.is_dir() {
                return Err(ConfigError::Invalid(format!("service.static_dir {} does not exist", dir.display())));
            }
        }
        let embedder = config.embedding.build()?;
        let generator = config.generation.build()?;
        let prompts = config.generation.prompt_builder()?;
        let retriever = if config.index.dir.join(crate::vector_store::MANIFEST_FILE).exists() {
            Some(
                Retriever::open(&config.index.dir, Some(&config.corpus.dir), embedder.clone())
                    .map_err(|e| ConfigError::Invalid(format!("index {}: {e}", config.index.dir.display())))?,
            )
        } else {
            tracing::warn!(dir = %config.index.dir.display(), "no index found; starting without one");
            None
        };
        Ok(Self::new(generator, embedder, retriever, prompts)
            .with_k(config.index.k)
            .with_snippet_chars(config.service.snippet_chars)
            .with_ingest(IngestTarget {
                corpus_dir: config.corpus.dir.clone(),
                index_dir: config.index.dir.clone(),
                metric: config.index.metric,
                options: config.corpus.ingest.clone(),
            }))
    }

    pub fn snapshot(&self) -> Option<Arc<Retriever>> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Replaces the index snapshot. In-flight requests finish on the old one.
    pub fn swap(&self, retriever: Retriever) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(retriever));
    }

    pub fn health(&self) -> Health {
        let snap = self.snapshot();
        Health {
            status: if snap.is_some() { "ok" } else { "no_index" }.into(),
            index_count: snap.map_or(0, |r| r.index().len()),
            model: self.generator.model_name(),
        }
    }

    fn snippet(&self, text: &str) -> String {
        text.chars().take(self.snippet_chars).collect()
    }

    pub fn search(&self, req: &SearchRequest) -> Result<Vec<Hit>, ServiceError> {
        if req.question.trim().is_empty() {
            return Err(ServiceError::BadRequest("question is empty".into()));
        }
        let retriever = self.snapshot().ok_or(ServiceError::IndexNotLoaded)?;
        let ctx = retriever.retrieve(&req.question, req.k.unwrap_or(self.k))?;
        Ok(ctx
            .hits
            .iter()
            .map(|h| Hit {
                chunk_id: h.chunk_id.clone(),
                source_url: h.metadata.source_url.clone(),
                score: h.score,
                snippet: self.snippet(&h.text),
            })
            .collect())
    }

    /// Retrieve, prompt, generate, parse, audit.
    pub fn ask(&self, req: &AskRequest) -> Result<AskResponse, ServiceError> {
        let started = Instant::now();
        if req.question.trim().is_empty() {
            return Err(ServiceError::BadRequest("question is empty".into()));
        }
        let retriever = self.snapshot().ok_or(ServiceError::IndexNotLoaded)?;
        let ctx = retriever.retrieve(&req.question, req.k.unwrap_or(self.k))?;
        let prompt = self
            .prompts
            .build(&req.question, &ctx)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let generation = self.generator.generate(&prompt)?;
        let parsed = parse_answer(&generation.text);
        let hits: Vec<Hit> = ctx
            .hits
            .iter()
            .map(|h| Hit {
                chunk_id: h.chunk_id.clone(),
                source_url: h.metadata.source_url.clone(),
                score: h.score,
                snippet: self.snippet(&h.text),
            })
            .collect();
        let hit_urls: Vec<&str> = hits.iter().map(|h| h.source_url.as_str()).collect();
        let audit = audit(&parsed, &hit_urls);
        let latency_ms = started.elapsed().as_millis() as u64;
        tracing::info!(latency_ms, hits = hits.len(), refs = parsed.references.len(), "ask");
        Ok(AskResponse {
            answer: generation.text,
            references: parsed.references,
            hits,
            audit,
            latency_ms,
        })
    }

    /// Ingests local paths into the corpus, rebuilds the index on disk and
    /// swaps it in. Requests are serialized.
    pub fn ingest(&self, req: &IngestRequest) -> Result<IngestResponse, ServiceError> {
        let target = self
            .ingest
            .as_ref()
            .ok_or_else(|| ServiceError::Internal("ingest is not configured".into()))?;
        if req.paths.is_empty() {
            return Err(ServiceError::BadRequest("paths is empty".into()));
        }
        let _guard = self.ingest_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut store =
            CorpusStore::open(&target.corpus_dir).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let inputs: Vec<IngestInput> = req
            .paths
            .iter()
            .map(|p| IngestInput::new(p.clone(), req.source_type))
            .collect();
        let report = match store.ingest(&inputs, &target.options) {
            Ok(r) => r,
            Err(CorpusError::AllFailed(errors)) => {
                return Err(ServiceError::IngestFailed(IngestReport {
                    manifest: store.manifest(),
                    added_documents: 0,
                    added_chunks: 0,
                    errors,
                }))
            }
            Err(e) => return Err(ServiceError::Internal(e.to_string())),
        };
        let index = index_corpus(&store, self.embedder.as_ref(), target.metric, &target.index_dir)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let index_count = index.len();
        let retriever = Retriever::new(Arc::new(index), store.chunks().to_vec(), self.embedder.clone())
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.swap(retriever);
        Ok(IngestResponse { report, index_count })
    }
}
