//! Grounded question answering over a domain knowledge base.
//!
//! The pipeline runs ingest → clean → chunk → embed → index → retrieve →
//! prompt → generate → parse citations → audit references → score. Every
//! stage is usable on its own; [`harness`] wires them into the three
//! evaluation settings (vanilla, RAG, RAG with a fine-tuned backend) and
//! [`service`] exposes the same flow over HTTP.
//!
//! Everything can run offline: [`embeddings::HashEmbedder`] is a
//! deterministic stand-in for a hosted embedding model and
//! [`llm_client::StubBackend`] replaces the chat-completion endpoint.
//!
//! See `examples/` for one runnable program per capability.

pub mod citations;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod harness;
pub mod llm_client;
pub mod metrics;
pub mod prompt;
pub mod qa_dataset;
pub mod retriever;
pub mod service;
pub mod vector_store;

mod jsonl;

pub use citations::{parse_answer, ParsedAnswer, Reference, ReferenceAudit, ReferenceStats};
pub use corpus::{chunk_text, clean_text, html_to_text, Chunk, CorpusStore, SourceType};
pub use embeddings::{EmbeddingVector, Embedder, HashEmbedder};
pub use llm_client::{GenerationBackendConfig, Generator, StubBackend, StubMode};
pub use metrics::{MetricReport, PairScores};
pub use prompt::{build_prompt, vanilla_prompt, PromptBundle};
pub use retriever::{RetrievedContext, Retriever};
pub use vector_store::{Metric, SearchHit, VectorIndex};
