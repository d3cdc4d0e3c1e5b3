use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    non_empty, GenerateError, GenerationBackendConfig, GenerationResult, Generator, InFlight,
    MessageLayout, Usage,
};
use crate::prompt::PromptBundle;

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    max_tokens: u32,
    stream: bool,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// The JSON body sent to `/v1/chat/completions`. Deterministic: the same
/// config and prompt always give the same bytes.
pub fn chat_request_body(config: &GenerationBackendConfig, prompt: &PromptBundle) -> Vec<u8> {
    let system = prompt.system_message();
    let rendered;
    let mut messages = Vec::with_capacity(2);
    match config.layout {
        MessageLayout::SystemUser => {
            if !system.is_empty() {
                messages.push(Message {
                    role: "system",
                    content: &system,
                });
            }
            messages.push(Message {
                role: "user",
                content: &prompt.question,
            });
        }
        MessageLayout::SingleUser => {
            rendered = prompt.render();
            messages.push(Message {
                role: "user",
                content: &rendered,
            });
        }
    }
    let req = ChatRequest {
        model: &config.model_name,
        messages,
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        stream: false,
    };
    serde_json::to_vec(&req).expect("request serializes")
}

/// Client for an OpenAI-style chat-completions endpoint.
pub struct HttpChatBackend {
    config: GenerationBackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: InFlight,
}

enum Attempt {
    Retry(GenerateError),
    Fatal(GenerateError),
}

impl HttpChatBackend {
    pub fn new(config: GenerationBackendConfig) -> Result<Self, GenerateError> {
        if config.temperature.is_nan() || config.temperature < 0.0 {
            return Err(GenerateError::Config("temperature must be >= 0".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GenerateError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let gate = InFlight::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            api_key,
            gate,
        })
    }

    pub fn config(&self) -> &GenerationBackendConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &[u8], attempts: u32) -> Result<(String, Option<Usage>), Attempt> {
        let mut req = self
            .client
            .post(self.endpoint())
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            Attempt::Retry(GenerateError::Transport {
                attempts,
                message: e.to_string(),
            })
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            Attempt::Retry(GenerateError::Transport {
                attempts,
                message: e.to_string(),
            })
        })?;
        if !status.is_success() {
            let err = GenerateError::Http {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
                attempts,
            };
            let transient = status.is_server_error() || status.as_u16() == 429;
            return Err(if transient { Attempt::Retry(err) } else { Attempt::Fatal(err) });
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(GenerateError::Protocol(e.to_string())))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Attempt::Fatal(GenerateError::Protocol("no choices".into())))?
            .message
            .content
            .unwrap_or_default();
        let usage = parsed.usage.map(|u| Usage {
            prompt_units: u.prompt_tokens,
            completion_units: u.completion_tokens,
        });
        Ok((content, usage))
    }
}

impl Generator for HttpChatBackend {
    fn generate(&self, prompt: &PromptBundle) -> Result<GenerationResult, GenerateError> {
        let body = chat_request_body(&self.config, prompt);
        let _permit = self.gate.acquire();
        let started = Instant::now();
        let max_attempts = self.config.retries + 1;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        for attempt in 1..=max_attempts {
            match self.attempt(&body, attempt) {
                Ok((text, usage)) => {
                    return Ok(GenerationResult {
                        text: non_empty(text)?,
                        backend: self.config.model_name.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        usage,
                        attempts: attempt,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempt == max_attempts => return Err(e),
                Err(Attempt::Retry(e)) => {
                    tracing::warn!(attempt, error = %e, "generation failed, retrying");
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }

    fn model_name(&self) -> String {
        self.config.model_name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{vanilla_prompt, PromptBuilder};
    use crate::retriever::RetrievedContext;

    #[test]
    fn body_is_byte_identical() {
        let cfg = GenerationBackendConfig::default();
        let p = PromptBuilder::default()
            .build("Q?", &RetrievedContext::empty("Q?", 3))
            .unwrap();
        assert_eq!(chat_request_body(&cfg, &p), chat_request_body(&cfg, &p));
    }

    #[test]
    fn vanilla_has_only_a_user_message() {
        let cfg = GenerationBackendConfig::default();
        let body = chat_request_body(&cfg, &vanilla_prompt("Q?").unwrap());
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(v["messages"], serde_json::json!([{ "role": "user", "content": "Q?" }]));
        assert_eq!(v["temperature"], 0.0);
    }

    #[test]
    fn system_user_split() {
        let cfg = GenerationBackendConfig::default();
        let p = PromptBuilder::new("SYS", 1000)
            .build("Q?", &RetrievedContext::empty("Q?", 3))
            .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&chat_request_body(&cfg, &p)).unwrap();
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][0]["content"], "SYS");
        assert_eq!(v["messages"][1]["content"], "Q?");

        let single = GenerationBackendConfig {
            layout: MessageLayout::SingleUser,
            ..cfg
        };
        let v: serde_json::Value = serde_json::from_slice(&chat_request_body(&single, &p)).unwrap();
        assert_eq!(v["messages"][0]["content"], "SYS\n\nQ?");
    }
}
