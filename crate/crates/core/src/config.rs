//! JSON configuration with `corpus`, `embedding`, `index`, `generation`
//! and `service` sections. Every field has a default, so `{}` is a valid
//! (fully offline) configuration. API keys come only from the environment
//! variables the sections name.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::IngestOptions;
use crate::embeddings::{Embedder, EmbeddingProviderConfig, HashEmbedder, ProviderEmbedder};
use crate::llm_client::{GenerationBackendConfig, Generator, HttpChatBackend, StubBackend, StubMode};
use crate::prompt::{PromptBuilder, DEFAULT_CHAR_BUDGET, SYSTEM_GROUNDED};
use crate::retriever::DEFAULT_K;
use crate::vector_store::Metric;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub dir: PathBuf,
    #[serde(flatten)]
    pub ingest: IngestOptions,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            dir: "corpus".into(),
            ingest: IngestOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBackend {
    /// Offline character-trigram hashing.
    #[default]
    Hash,
    /// OpenAI-style `/v1/embeddings` endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    pub backend: EmbeddingBackend,
    #[serde(flatten)]
    pub provider: EmbeddingProviderConfig,
}

impl EmbeddingSection {
    pub fn build(&self) -> Result<Arc<dyn Embedder>, ConfigError> {
        if self.provider.dim == 0 {
            return Err(ConfigError::Invalid("embedding.dim must be >= 1".into()));
        }
        if self.provider.batch_size == 0 {
            return Err(ConfigError::Invalid("embedding.batch_size must be >= 1".into()));
        }
        Ok(match self.backend {
            EmbeddingBackend::Hash => Arc::new(HashEmbedder::new(self.provider.dim)),
            EmbeddingBackend::Http => Arc::new(
                ProviderEmbedder::http(self.provider.clone())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexSection {
    pub dir: PathBuf,
    pub metric: Metric,
    pub k: usize,
}

impl Default for IndexSection {
    fn default() -> Self {
        Self {
            dir: "index".into(),
            metric: Metric::Cosine,
            k: DEFAULT_K,
        }
    }
}

/// Offline generation. `fixtures` is a JSONL file of `{question, answer}`
/// objects, required in canned mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubSection {
    pub mode: StubMode,
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedAnswer {
    pub question: String,
    pub answer: String,
}

impl StubSection {
    pub fn build(&self) -> Result<StubBackend, ConfigError> {
        let fixtures: Vec<CannedAnswer> = match &self.fixtures {
            Some(path) => crate::jsonl::read(path).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            None if self.mode == StubMode::Canned => {
                return Err(ConfigError::Invalid("canned stub needs a fixtures file".into()))
            }
            None => Vec::new(),
        };
        Ok(StubBackend::new(
            self.mode,
            fixtures.into_iter().map(|f| (f.question, f.answer)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSection {
    #[serde(flatten)]
    pub backend: GenerationBackendConfig,
    /// When set, generation never touches the network.
    pub stub: Option<StubSection>,
    pub char_budget: usize,
    /// Replaces the shipped grounding text.
    pub system_prompt_path: Option<PathBuf>,
    /// System line for the vanilla setting; empty means question only.
    pub vanilla_system_line: String,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            backend: GenerationBackendConfig::default(),
            stub: None,
            char_budget: DEFAULT_CHAR_BUDGET,
            system_prompt_path: None,
            vanilla_system_line: String::new(),
        }
    }
}

impl GenerationSection {
    pub fn build(&self) -> Result<Arc<dyn Generator>, ConfigError> {
        Ok(match &self.stub {
            Some(stub) => Arc::new(stub.build()?),
            None => Arc::new(
                HttpChatBackend::new(self.backend.clone())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            ),
        })
    }

    pub fn prompt_builder(&self) -> Result<PromptBuilder, ConfigError> {
        let system = match &self.system_prompt_path {
            Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?,
            None => SYSTEM_GROUNDED.to_string(),
        };
        Ok(PromptBuilder::new(system, self.char_budget))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSection {
    pub listen: String,
    pub cors_allowed_origins: Vec<String>,
    /// Built web UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    pub snippet_chars: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            cors_allowed_origins: Vec::new(),
            static_dir: None,
            snippet_chars: 300,
        }
    }
}

impl ServiceSection {
    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("service.listen {:?}: {e}", self.listen)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub corpus: CorpusSection,
    pub embedding: EmbeddingSection,
    pub index: IndexSection,
    pub generation: GenerationSection,
    pub service: ServiceSection,
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
