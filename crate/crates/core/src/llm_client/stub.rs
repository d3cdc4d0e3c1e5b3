use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{non_empty, GenerateError, GenerationResult, Generator};
use crate::prompt::PromptBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubMode {
    /// Answer with the prompt's question.
    Echo,
    /// Answer from fixtures keyed by question.
    Canned,
    /// Always answer "", which surfaces as an empty-generation error.
    Empty,
}

/// Fixture key: hex SHA-256 of the whitespace-trimmed question.
pub fn question_key(question: &str) -> String {
    hex::encode(Sha256::digest(question.trim().as_bytes()))
}

/// Offline, deterministic backend.
#[derive(Debug, Clone)]
pub struct StubBackend {
    mode: StubMode,
    fixtures: HashMap<String, String>,
    name: String,
}

impl StubBackend {
    pub fn echo() -> Self {
        Self::new(StubMode::Echo, std::iter::empty::<(String, String)>())
    }

    pub fn empty() -> Self {
        Self::new(StubMode::Empty, std::iter::empty::<(String, String)>())
    }

    /// Canned answers from `(question, answer)` pairs.
    pub fn canned<Q, A>(fixtures: impl IntoIterator<Item = (Q, A)>) -> Self
    where
        Q: AsRef<str>,
        A: Into<String>,
    {
        Self::new(StubMode::Canned, fixtures)
    }

    pub fn new<Q, A>(mode: StubMode, fixtures: impl IntoIterator<Item = (Q, A)>) -> Self
    where
        Q: AsRef<str>,
        A: Into<String>,
    {
        let fixtures = fixtures
            .into_iter()
            .map(|(q, a)| (question_key(q.as_ref()), a.into()))
            .collect();
        let name = match mode {
            StubMode::Echo => "stub-echo",
            StubMode::Canned => "stub-canned",
            StubMode::Empty => "stub-empty",
        };
        Self {
            mode,
            fixtures,
            name: name.into(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn mode(&self) -> StubMode {
        self.mode
    }

    pub fn n_fixtures(&self) -> usize {
        self.fixtures.len()
    }
}

impl Generator for StubBackend {
    fn generate(&self, prompt: &PromptBundle) -> Result<GenerationResult, GenerateError> {
        let text = match self.mode {
            StubMode::Echo => prompt.question.clone(),
            StubMode::Empty => String::new(),
            StubMode::Canned => self
                .fixtures
                .get(&question_key(&prompt.question))
                .cloned()
                .ok_or_else(|| GenerateError::MissingFixture(prompt.question.clone()))?,
        };
        Ok(GenerationResult {
            text: non_empty(text)?,
            backend: self.name.clone(),
            latency_ms: 0,
            usage: None,
            attempts: 1,
        })
    }

    fn model_name(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::vanilla_prompt;

    #[test]
    fn echo_returns_question() {
        let r = StubBackend::echo().generate(&vanilla_prompt("hi").unwrap()).unwrap();
        assert_eq!(r.text, "hi");
    }

    #[test]
    fn empty_mode_is_an_error() {
        let err = StubBackend::empty().generate(&vanilla_prompt("hi").unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "empty generation");
    }

    #[test]
    fn canned_round_trip_and_missing() {
        let answer = "Yes [1].\nReferences: [1] https://kb.example/a";
        let stub = StubBackend::canned([("Is it?", answer)]);
        let got = stub.generate(&vanilla_prompt("Is it?").unwrap()).unwrap();
        assert_eq!(got.text, answer);
        let err = stub.generate(&vanilla_prompt("Other?").unwrap()).unwrap_err();
        assert!(err.to_string().contains("\"Other?\""));
    }
}
