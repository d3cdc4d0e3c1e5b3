//! Evaluation runs: push a test set through one setting (vanilla, RAG, or
//! RAG with a fine-tuned backend), score every answer against its gold
//! answer, audit references, and persist the artifacts.
//!
//! A run directory holds `result.json` (aggregates and run metadata),
//! `items.jsonl` (one artifact per question, sorted by id) and
//! `timing.json` (wall-clock data). The first two are byte-identical
//! across reruns with deterministic backends.

mod compare;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::citations::{
    aggregate, audit, audit_with_liveness, parse_answer, scoring_text, LivenessChecker,
    ParsedAnswer, ReferenceAudit, ReferenceStats,
};
use crate::embeddings::Embedder;
use crate::llm_client::{GenerateError, Generator};
use crate::metrics::{evaluate_pair, MetricConfig, MetricReport, PairScores};
use crate::prompt::{vanilla_prompt_with, PromptBuilder, PromptBundle, DEFAULT_CHAR_BUDGET};
use crate::qa_dataset::{self, QAPair, Split};
use crate::retriever::{Retriever, DEFAULT_K};

pub use compare::{compare_runs, Comparison, ComparisonRow};

pub const RESULT_FILE: &str = "result.json";
pub const ITEMS_FILE: &str = "items.jsonl";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Vanilla,
    Rag,
    RagFt,
}

impl Setting {
    pub fn uses_retrieval(self) -> bool {
        !matches!(self, Self::Vanilla)
    }
}

impl FromStr for Setting {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(Self::Vanilla),
            "rag" => Ok(Self::Rag),
            "rag_ft" | "rag-ft" => Ok(Self::RagFt),
            other => Err(HarnessError::Config(format!("unknown setting {other:?}"))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vanilla => "vanilla",
            Self::Rag => "rag",
            Self::RagFt => "rag_ft",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] qa_dataset::DatasetError),
    #[error("no test items to evaluate")]
    NoItems,
    #[error("{failed} of {total} items failed at the backend (threshold {threshold})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        threshold: f64,
    },
    #[error("runs cover different test sets: {0}")]
    DatasetMismatch(String),
    #[error("need at least two runs to compare")]
    TooFewRuns,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalRunConfig {
    pub setting: Setting,
    /// Free-form label for reports; defaults to the setting name.
    pub label: Option<String>,
    pub k: usize,
    pub dataset_path: PathBuf,
    pub index_path: Option<PathBuf>,
    pub char_budget: usize,
    pub output_dir: Option<PathBuf>,
    pub check_live: bool,
    pub liveness_timeout_secs: u64,
    /// Abort when more than this share of items fail at the backend.
    pub failure_threshold: f64,
    /// Score answer bodies without their reference lists.
    pub body_only: bool,
    pub include_unvalidated: bool,
    pub vanilla_system_line: String,
    pub concurrency: usize,
}

impl Default for EvalRunConfig {
    fn default() -> Self {
        Self {
            setting: Setting::Rag,
            label: None,
            k: DEFAULT_K,
            dataset_path: PathBuf::new(),
            index_path: None,
            char_budget: DEFAULT_CHAR_BUDGET,
            output_dir: None,
            check_live: false,
            liveness_timeout_secs: 10,
            failure_threshold: 0.5,
            body_only: true,
            include_unvalidated: false,
            vanilla_system_line: String::new(),
            concurrency: 4,
        }
    }
}

/// Runtime collaborators of a run.
pub struct EvalDeps<'a> {
    pub generator: &'a dyn Generator,
    /// Required for the retrieval settings, ignored for vanilla.
    pub retriever: Option<&'a Retriever>,
    /// Embedder for the semantic similarity score.
    pub embedder: &'a dyn Embedder,
    pub prompts: PromptBuilder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitSummary {
    pub chunk_id: String,
    pub source_url: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemArtifact {
    pub id: String,
    pub question: String,
    pub gold_answer: String,
    pub hits: Vec<HitSummary>,
    pub prompt: PromptBundle,
    pub answer: String,
    pub error: Option<String>,
    pub parsed: ParsedAnswer,
    pub audit: ReferenceAudit,
    pub scores: PairScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub label: String,
    pub setting: Setting,
    pub model: String,
    pub k: Option<usize>,
    pub char_budget: usize,
    pub body_only: bool,
    pub check_live: bool,
    pub dataset_path: String,
    pub index_path: Option<String>,
    pub dataset_fingerprint: String,
    pub n_items: usize,
    pub n_errors: usize,
    pub n_backend_failures: usize,
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub metric_report: MetricReport,
    pub reference_stats: ReferenceStats,
    /// Reference presence in the gold answers, the expected behavior.
    pub gold_reference_stats: ReferenceStats,
    pub run_metadata: RunMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTiming {
    pub id: String,
    pub latency_ms: u64,
}

/// Contents of `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub items: Vec<ItemTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRunResult {
    pub summary: RunSummary,
    pub per_item_artifacts: Vec<ItemArtifact>,
    pub timing: RunTiming,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| io_err(path, e))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

impl EvalRunResult {
    pub fn persist(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_json(&dir.join(RESULT_FILE), &self.summary)?;
        write_json(&dir.join(TIMING_FILE), &self.timing)?;
        let items = dir.join(ITEMS_FILE);
        crate::jsonl::write(&items, &self.per_item_artifacts).map_err(|e| io_err(&items, e))
    }
}

/// Reads `result.json` from a run directory (or the file itself).
pub fn load_summary(path: &Path) -> Result<RunSummary, HarnessError> {
    let file = if path.is_dir() { path.join(RESULT_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(&file, e))
}

/// Hash over the ids, questions and gold answers of the evaluated items.
pub fn dataset_fingerprint(items: &[QAPair]) -> String {
    let mut sorted: Vec<&QAPair> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut h = Sha256::new();
    for p in sorted {
        for field in [&p.id, &p.question, &p.answer] {
            h.update(field.as_bytes());
            h.update([0u8]);
        }
    }
    hex::encode(h.finalize())
}

/// The items a run evaluates: the test split when the dataset is split,
/// otherwise every pair; unvalidated drafts only on request.
pub fn select_items(pairs: Vec<QAPair>, include_unvalidated: bool) -> Vec<QAPair> {
    let labeled = pairs.iter().any(|p| p.split.is_some());
    let mut items: Vec<QAPair> = pairs
        .into_iter()
        .filter(|p| !labeled || p.split == Some(Split::Test))
        .filter(|p| include_unvalidated || !p.unvalidated)
        .collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    items
}

struct Outcome {
    artifact: ItemArtifact,
    backend_failure: bool,
    latency_ms: u64,
}

fn run_item(
    pair: &QAPair,
    config: &EvalRunConfig,
    deps: &EvalDeps<'_>,
    liveness: Option<&LivenessChecker>,
) -> Result<Outcome, HarnessError> {
    let started = Instant::now();
    let mut hits = Vec::new();
    let mut error = None;
    let prompt = if config.setting.uses_retrieval() {
        let retriever = deps
            .retriever
            .ok_or_else(|| HarnessError::Config(format!("setting {} needs an index", config.setting)))?;
        match retriever.retrieve(&pair.question, config.k) {
            Ok(ctx) => {
                hits = ctx
                    .hits
                    .iter()
                    .map(|h| HitSummary {
                        chunk_id: h.chunk_id.clone(),
                        source_url: h.metadata.source_url.clone(),
                        score: h.score,
                    })
                    .collect();
                deps.prompts.build(&pair.question, &ctx)
            }
            Err(e) => {
                error = Some(format!("retrieval: {e}"));
                deps.prompts.build(&pair.question, &crate::retriever::RetrievedContext::empty(&pair.question, config.k))
            }
        }
    } else {
        vanilla_prompt_with(&pair.question, &config.vanilla_system_line)
    }
    .map_err(|e| HarnessError::Config(format!("item {}: {e}", pair.id)))?;

    let mut backend_failure = false;
    let answer = match deps.generator.generate(&prompt) {
        Ok(r) => r.text,
        Err(e) => {
            backend_failure = e.is_backend_failure();
            if e != GenerateError::EmptyGeneration {
                tracing::warn!(id = %pair.id, error = %e, "generation failed");
            }
            error.get_or_insert_with(|| e.to_string());
            String::new()
        }
    };

    let parsed = parse_answer(&answer);
    let sources = prompt.source_urls();
    let audit = match liveness {
        Some(checker) => audit_with_liveness(&parsed, &sources, checker),
        None => audit(&parsed, &sources),
    };
    let (candidate, reference) = if config.body_only {
        (scoring_text(&answer), scoring_text(&pair.answer))
    } else {
        (answer.clone(), pair.answer.clone())
    };
    let scores = evaluate_pair(&pair.id, &candidate, &reference, deps.embedder)
        .map_err(|e| HarnessError::Config(format!("item {}: {e}", pair.id)))?;

    Ok(Outcome {
        artifact: ItemArtifact {
            id: pair.id.clone(),
            question: pair.question.clone(),
            gold_answer: pair.answer.clone(),
            hits,
            prompt,
            answer,
            error,
            parsed,
            audit,
            scores,
        },
        backend_failure,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}

/// Loads the dataset named in `config` and runs it.
pub fn run_eval(config: &EvalRunConfig, deps: &EvalDeps<'_>) -> Result<EvalRunResult, HarnessError> {
    let pairs = qa_dataset::load(&config.dataset_path)?;
    run_items(config, select_items(pairs, config.include_unvalidated), deps)
}

/// Runs already-selected items. Artifacts are persisted when
/// `output_dir` is set, even if the run then fails the error threshold.
pub fn run_items(
    config: &EvalRunConfig,
    mut items: Vec<QAPair>,
    deps: &EvalDeps<'_>,
) -> Result<EvalRunResult, HarnessError> {
    if items.is_empty() {
        return Err(HarnessError::NoItems);
    }
    if config.setting.uses_retrieval() && deps.retriever.is_none() {
        return Err(HarnessError::Config(format!("setting {} needs an index", config.setting)));
    }
    items.sort_by(|a, b| a.id.cmp(&b.id));
    let started_at = Utc::now();
    let liveness = config
        .check_live
        .then(|| LivenessChecker::new(std::time::Duration::from_secs(config.liveness_timeout_secs)));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let outcomes = pool.install(|| {
        items
            .par_iter()
            .map(|p| run_item(p, config, deps, liveness.as_ref()))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let finished_at = Utc::now();

    let n = outcomes.len();
    let n_backend_failures = outcomes.iter().filter(|o| o.backend_failure).count();
    let n_errors = outcomes.iter().filter(|o| o.artifact.error.is_some()).count();
    let timing = RunTiming {
        started_at,
        finished_at,
        items: outcomes
            .iter()
            .map(|o| ItemTiming {
                id: o.artifact.id.clone(),
                latency_ms: o.latency_ms,
            })
            .collect(),
    };
    let artifacts: Vec<ItemArtifact> = outcomes.into_iter().map(|o| o.artifact).collect();

    let per_item: Vec<PairScores> = artifacts.iter().map(|a| a.scores.clone()).collect();
    let metric_report = MetricReport {
        n_items: n,
        aggregates: crate::metrics::aggregate(&per_item),
        per_item,
        config: MetricConfig::new(deps.embedder, config.body_only),
    };
    let audits: Vec<ReferenceAudit> = artifacts.iter().map(|a| a.audit.clone()).collect();
    let gold_audits: Vec<ReferenceAudit> = items
        .iter()
        .map(|p| audit(&parse_answer(&p.answer), &[] as &[&str]))
        .collect();
    let err = |e: crate::citations::CitationError| HarnessError::Config(e.to_string());
    let summary = RunSummary {
        metric_report,
        reference_stats: aggregate(&audits).map_err(err)?,
        gold_reference_stats: aggregate(&gold_audits).map_err(err)?,
        run_metadata: RunMetadata {
            label: config.label.clone().unwrap_or_else(|| config.setting.to_string()),
            setting: config.setting,
            model: deps.generator.model_name(),
            k: config.setting.uses_retrieval().then_some(config.k),
            char_budget: config.char_budget,
            body_only: config.body_only,
            check_live: config.check_live,
            dataset_path: config.dataset_path.display().to_string(),
            index_path: config
                .setting
                .uses_retrieval()
                .then(|| config.index_path.as_ref().map(|p| p.display().to_string()))
                .flatten(),
            dataset_fingerprint: dataset_fingerprint(&items),
            n_items: n,
            n_errors,
            n_backend_failures,
        },
    };
    let result = EvalRunResult {
        summary,
        per_item_artifacts: artifacts,
        timing,
    };
    if let Some(dir) = &config.output_dir {
        result.persist(dir)?;
    }
    if n_backend_failures as f64 > config.failure_threshold * n as f64 {
        return Err(HarnessError::TooManyFailures {
            failed: n_backend_failures,
            total: n,
            threshold: config.failure_threshold,
        });
    }
    Ok(result)
}
