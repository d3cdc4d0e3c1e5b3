//! Chat-completion generation. The vanilla, RAG and fine-tuned settings
//! differ only in which endpoint and model they point at.

mod http;
mod stub;

use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::prompt::PromptBundle;

pub use http::{chat_request_body, HttpChatBackend};
pub use stub::{question_key, StubBackend, StubMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageLayout {
    /// System message carries the grounding text and context blocks, the
    /// user message carries the question.
    #[default]
    SystemUser,
    /// Everything in one user message, exactly `PromptBundle::rendered`.
    SingleUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationBackendConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub api_key_env: String,
    /// Extra attempts after the first one.
    pub retries: u32,
    /// First retry delay; doubles on every further retry.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub layout: MessageLayout,
}

impl Default for GenerationBackendConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000".into(),
            model_name: "default".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            api_key_env: "LLM_API_KEY".into(),
            retries: 2,
            backoff_ms: 500,
            max_in_flight: 4,
            layout: MessageLayout::SystemUser,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_units: u64,
    pub completion_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub backend: String,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
    pub attempts: u32,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("empty generation")]
    EmptyGeneration,
    #[error("no canned answer for question {0:?}")]
    MissingFixture(String),
    #[error("backend unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned HTTP {status} after {attempts} attempts: {body}")]
    Http { status: u16, body: String, attempts: u32 },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl GenerateError {
    /// Backend-side failures, as opposed to bad input or configuration.
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::Http { .. } | Self::Protocol(_))
    }
}

/// A chat-completion backend.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &PromptBundle) -> Result<GenerationResult, GenerateError>;

    /// Recorded as `GenerationResult::backend` and in run metadata.
    fn model_name(&self) -> String;
}

/// Rejects blank completions.
pub(crate) fn non_empty(text: String) -> Result<String, GenerateError> {
    if text.trim().is_empty() {
        Err(GenerateError::EmptyGeneration)
    } else {
        Ok(text)
    }
}

/// Counting semaphore bounding requests in flight.
#[derive(Debug)]
pub(crate) struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub(crate) struct Permit<'a>(&'a InFlight);

impl InFlight {
    pub(crate) fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}
