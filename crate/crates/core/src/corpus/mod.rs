//! Source documents → cleaned text → fixed-budget chunks.
//!
//! A corpus directory holds `documents.jsonl` ([`SourceDocument`] records) and
//! `chunks.jsonl` ([`Chunk`] records). [`CorpusStore::ingest`] is the only
//! writer; everything else here is pure.

mod chunk;
mod clean;
mod html;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use chunk::{chunk_text, TextSpan, DEFAULT_MAX_CHARS};
pub use clean::{clean_text, clean_with_report, CleaningReport};
pub use html::html_to_text;

use crate::jsonl;

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const CHUNKS_FILE: &str = "chunks.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Jsonl(#[from] jsonl::JsonlError),
    #[error("{location}: {message}")]
    Input { location: String, message: String },
    #[error("all {} inputs failed to ingest", .0.len())]
    AllFailed(Vec<IngestItemError>),
    #[error("unknown source type {0:?} (expected forum, guideline, literature or web_article)")]
    UnknownSourceType(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    Forum,
    Guideline,
    Literature,
    WebArticle,
}

impl FromStr for SourceType {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forum" => Ok(Self::Forum),
            "guideline" => Ok(Self::Guideline),
            "literature" => Ok(Self::Literature),
            "web_article" | "web-article" => Ok(Self::WebArticle),
            other => Err(CorpusError::UnknownSourceType(other.to_string())),
        }
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forum => "forum",
            Self::Guideline => "guideline",
            Self::Literature => "literature",
            Self::WebArticle => "web_article",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFormat {
    Html,
    Markdown,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub id: String,
    pub source_url: String,
    pub source_type: SourceType,
    pub format: DocFormat,
    pub raw_text: String,
    pub retrieved_at: DateTime<Utc>,
}

impl SourceDocument {
    pub fn new(
        source_url: impl Into<String>,
        source_type: SourceType,
        format: DocFormat,
        raw_text: impl Into<String>,
    ) -> Self {
        let source_url = source_url.into();
        let raw_text = raw_text.into();
        Self {
            id: document_id(&source_url, &raw_text),
            source_url,
            source_type,
            format,
            raw_text,
            retrieved_at: Utc::now(),
        }
    }

    /// Plain text for cleaning: HTML is converted, markdown and plain text
    /// pass through.
    pub fn extracted_text(&self) -> String {
        match self.format {
            DocFormat::Html => html_to_text(&self.raw_text),
            DocFormat::Markdown | DocFormat::Plain => self.raw_text.clone(),
        }
    }

    pub fn clean(&self) -> CleanDocument {
        let (text, cleaning_report) = clean_with_report(&self.extracted_text());
        CleanDocument {
            doc_id: self.id.clone(),
            text,
            cleaning_report,
        }
    }
}

/// Hex SHA-256 prefix (128 bits) over `source_url`, a NUL separator, and
/// `raw_text`.
pub fn document_id(source_url: &str, raw_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(source_url.as_bytes());
    hasher.update([0u8]);
    hasher.update(raw_text.as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub doc_id: String,
    pub text: String,
    pub cleaning_report: CleaningReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMetadata {
    pub source_url: String,
    pub source_type: SourceType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub span: (usize, usize),
    pub metadata: ChunkMetadata,
}

pub fn chunk_document(doc: &SourceDocument, clean: &CleanDocument, max_chars: usize) -> Vec<Chunk> {
    chunk_text(&clean.text, max_chars)
        .into_iter()
        .map(|span| Chunk {
            chunk_id: format!("{}:{}", doc.id, span.ordinal),
            doc_id: doc.id.clone(),
            ordinal: span.ordinal,
            span: (span.start, span.end),
            text: span.text,
            metadata: ChunkMetadata {
                source_url: doc.source_url.clone(),
                source_type: doc.source_type,
            },
        })
        .collect()
}

/// One ingestion input: a filesystem path or an http(s) URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestInput {
    pub location: String,
    pub source_type: SourceType,
}

impl IngestInput {
    pub fn new(location: impl Into<String>, source_type: SourceType) -> Self {
        Self {
            location: location.into(),
            source_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub max_chars: usize,
    /// Command used to turn a PDF into text on stdout. `{input}` is replaced
    /// by the file path, e.g. `pdftotext -layout {input} -`.
    pub pdf_converter: Option<String>,
    pub fetch_timeout_secs: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_chars: DEFAULT_MAX_CHARS,
            pdf_converter: None,
            fetch_timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub n_documents: usize,
    pub n_chunks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestItemError {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    /// Totals for the whole store after this ingest.
    pub manifest: CorpusManifest,
    pub added_documents: usize,
    pub added_chunks: usize,
    pub errors: Vec<IngestItemError>,
}

/// On-disk corpus: documents and chunks as JSONL, loaded fully in memory.
#[derive(Debug)]
pub struct CorpusStore {
    dir: PathBuf,
    documents: Vec<SourceDocument>,
    chunks: Vec<Chunk>,
    doc_ids: HashSet<String>,
}

impl CorpusStore {
    /// Opens (creating if needed) the corpus at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let documents: Vec<SourceDocument> = read_if_exists(&dir.join(DOCUMENTS_FILE))?;
        let chunks: Vec<Chunk> = read_if_exists(&dir.join(CHUNKS_FILE))?;
        let doc_ids = documents.iter().map(|d| d.id.clone()).collect();
        Ok(Self {
            dir,
            documents,
            chunks,
            doc_ids,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn documents(&self) -> &[SourceDocument] {
        &self.documents
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            n_documents: self.documents.len(),
            n_chunks: self.chunks.len(),
        }
    }

    pub fn chunk_map(&self) -> HashMap<String, Chunk> {
        self.chunks
            .iter()
            .map(|c| (c.chunk_id.clone(), c.clone()))
            .collect()
    }

    /// Reads each input, then stores the new documents and their chunks.
    ///
    /// Unreadable inputs are reported per item and skipped. The call fails
    /// only when every input fails.
    pub fn ingest(
        &mut self,
        inputs: &[IngestInput],
        opts: &IngestOptions,
    ) -> Result<IngestReport, CorpusError> {
        let loaded: Vec<Result<SourceDocument, CorpusError>> = inputs
            .par_iter()
            .map(|input| load_input(input, opts))
            .collect();

        let mut docs = Vec::new();
        let mut errors = Vec::new();
        for (input, result) in inputs.iter().zip(loaded) {
            match result {
                Ok(doc) => docs.push(doc),
                Err(e) => errors.push(IngestItemError {
                    location: input.location.clone(),
                    message: e.to_string(),
                }),
            }
        }
        if !inputs.is_empty() && errors.len() == inputs.len() {
            return Err(CorpusError::AllFailed(errors));
        }
        let (added_documents, added_chunks) = self.add_documents(docs, opts.max_chars)?;
        Ok(IngestReport {
            manifest: self.manifest(),
            added_documents,
            added_chunks,
            errors,
        })
    }

    /// Stores already-loaded documents, skipping ids already present.
    /// Returns `(documents added, chunks added)`.
    pub fn add_documents(
        &mut self,
        docs: Vec<SourceDocument>,
        max_chars: usize,
    ) -> Result<(usize, usize), CorpusError> {
        let mut fresh = Vec::new();
        for doc in docs {
            if self.doc_ids.insert(doc.id.clone()) {
                fresh.push(doc);
            }
        }
        let chunks: Vec<Chunk> = fresh
            .par_iter()
            .flat_map_iter(|doc| chunk_document(doc, &doc.clean(), max_chars))
            .collect();

        let docs_path = self.dir.join(DOCUMENTS_FILE);
        let chunks_path = self.dir.join(CHUNKS_FILE);
        jsonl::append(&docs_path, &fresh).map_err(io_err(&docs_path))?;
        jsonl::append(&chunks_path, &chunks).map_err(io_err(&chunks_path))?;

        let added = (fresh.len(), chunks.len());
        self.documents.extend(fresh);
        self.chunks.extend(chunks);
        Ok(added)
    }
}

fn read_if_exists<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    if path.exists() {
        Ok(jsonl::read(path)?)
    } else {
        Ok(Vec::new())
    }
}

fn load_input(input: &IngestInput, opts: &IngestOptions) -> Result<SourceDocument, CorpusError> {
    let fail = |message: String| CorpusError::Input {
        location: input.location.clone(),
        message,
    };
    let loc = input.location.as_str();

    let (url, format, raw) = if loc.starts_with("http://") || loc.starts_with("https://") {
        let (body, is_html) = fetch(loc, opts.fetch_timeout_secs).map_err(fail)?;
        let format = if is_html || looks_like_html(&body) {
            DocFormat::Html
        } else {
            DocFormat::Plain
        };
        (loc.to_string(), format, body)
    } else {
        let path = Path::new(loc);
        let abs = std::fs::canonicalize(path).map_err(|e| fail(e.to_string()))?;
        let url = url::Url::from_file_path(&abs)
            .map(|u| u.to_string())
            .map_err(|_| fail("path cannot be expressed as a file URL".into()))?;
        let ext = abs
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        if ext == "pdf" {
            let text = convert_pdf(&abs, opts.pdf_converter.as_deref()).map_err(fail)?;
            (url, DocFormat::Plain, text)
        } else {
            let bytes = std::fs::read(&abs).map_err(|e| fail(e.to_string()))?;
            let body = String::from_utf8_lossy(&bytes).into_owned();
            let format = match ext.as_str() {
                "html" | "htm" | "xhtml" => DocFormat::Html,
                "md" | "markdown" => DocFormat::Markdown,
                "txt" | "text" => DocFormat::Plain,
                _ if looks_like_html(&body) => DocFormat::Html,
                _ => DocFormat::Plain,
            };
            (url, format, body)
        }
    };

    if raw.trim().is_empty() {
        return Err(fail("document is empty".into()));
    }
    Ok(SourceDocument::new(url, input.source_type, format, raw))
}

fn looks_like_html(body: &str) -> bool {
    let head: String = body.chars().take(512).collect::<String>().to_ascii_lowercase();
    let head = head.trim_start();
    head.starts_with("<!doctype html") || head.starts_with("<html") || head.contains("<body")
}

fn fetch(url: &str, timeout_secs: u64) -> Result<(String, bool), String> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .map_err(|e| e.to_string())?;
    let resp = client.get(url).send().map_err(|e| e.to_string())?;
    if !resp.status().is_success() {
        return Err(format!("HTTP {}", resp.status()));
    }
    let is_html = resp
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("html"));
    let body = resp.text().map_err(|e| e.to_string())?;
    Ok((body, is_html))
}

fn convert_pdf(path: &Path, converter: Option<&str>) -> Result<String, String> {
    let template = converter.ok_or("PDF input needs a configured converter command")?;
    let path = path.to_string_lossy();
    let mut parts = template
        .split_whitespace()
        .map(|p| p.replace("{input}", &path));
    let program = parts.next().ok_or("converter command is empty")?;
    let output = Command::new(&program)
        .args(parts)
        .output()
        .map_err(|e| format!("failed to run {program}: {e}"))?;
    if !output.status.success() {
        return Err(format!(
            "{program} exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}
