use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{EmbedError, Embedder, EmbeddingVector, DEFAULT_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingProviderConfig {
    pub base_url: String,
    pub model_name: String,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub api_key_env: String,
    pub dim: usize,
    /// Batches in flight at once.
    pub parallelism: usize,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8080".into(),
            model_name: "BAAI/bge-base-en-v1.5".into(),
            batch_size: 32,
            timeout_secs: 60,
            api_key_env: "EMBEDDING_API_KEY".into(),
            dim: DEFAULT_DIM,
            parallelism: 1,
        }
    }
}

/// Something that embeds one batch of texts, returning raw vectors.
pub trait BatchProvider: Send + Sync {
    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

/// Embeds `texts` in batches of `batch_size`, preserving input order.
///
/// Up to `parallelism` batches are requested concurrently. Every returned
/// vector must have `dim` entries and is normalized before being returned.
pub fn embed_texts(
    provider: &dyn BatchProvider,
    texts: &[String],
    batch_size: usize,
    dim: usize,
    parallelism: usize,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.iter().any(|t| t.is_empty()) {
        return Err(EmbedError::EmptyText);
    }
    let batches: Vec<&[String]> = texts.chunks(batch_size.max(1)).collect();
    let mut raw: Vec<Result<Vec<Vec<f32>>, EmbedError>> = Vec::with_capacity(batches.len());

    for group in batches.chunks(parallelism.max(1)) {
        if group.len() == 1 {
            raw.push(provider.embed_batch(group[0]));
            continue;
        }
        let results = std::thread::scope(|s| {
            let handles: Vec<_> = group
                .iter()
                .map(|batch| s.spawn(move || provider.embed_batch(batch)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect::<Vec<_>>()
        });
        raw.extend(results);
    }

    let mut out = Vec::with_capacity(texts.len());
    for (batch, result) in batches.iter().zip(raw) {
        let vectors = result?;
        if vectors.len() != batch.len() {
            return Err(EmbedError::Protocol(format!(
                "asked for {} embeddings, got {}",
                batch.len(),
                vectors.len()
            )));
        }
        for values in vectors {
            if values.len() != dim {
                return Err(EmbedError::DimMismatch {
                    expected: dim,
                    got: values.len(),
                });
            }
            out.push(EmbeddingVector::new(values)?.normalized()?);
        }
    }
    Ok(out)
}

/// Client for an OpenAI-style `POST {base_url}/v1/embeddings` endpoint.
pub struct HttpEmbeddingProvider {
    config: EmbeddingProviderConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f32>,
}

impl HttpEmbeddingProvider {
    pub fn new(config: EmbeddingProviderConfig) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self {
            config,
            client,
            api_key,
        })
    }

    pub fn config(&self) -> &EmbeddingProviderConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/embeddings", self.config.base_url.trim_end_matches('/'))
    }
}

impl BatchProvider for HttpEmbeddingProvider {
    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let body = json!({ "model": self.config.model_name, "input": batch });
        let mut req = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(EmbedError::Http {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let parsed: EmbeddingResponse =
            serde_json::from_str(&text).map_err(|e| EmbedError::Protocol(e.to_string()))?;

        let mut slots: Vec<Option<Vec<f32>>> = vec![None; batch.len()];
        for datum in parsed.data {
            let slot = slots.get_mut(datum.index).ok_or_else(|| {
                EmbedError::Protocol(format!("embedding index {} out of range", datum.index))
            })?;
            *slot = Some(datum.embedding);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| EmbedError::Protocol(format!("missing embedding {i}"))))
            .collect()
    }
}

/// Adapts a [`BatchProvider`] to the [`Embedder`] interface.
pub struct ProviderEmbedder<P> {
    provider: P,
    batch_size: usize,
    dim: usize,
    parallelism: usize,
    descriptor: String,
}

impl<P: BatchProvider> ProviderEmbedder<P> {
    pub fn new(provider: P, batch_size: usize, dim: usize, parallelism: usize, descriptor: String) -> Self {
        Self {
            provider,
            batch_size,
            dim,
            parallelism,
            descriptor,
        }
    }
}

impl ProviderEmbedder<HttpEmbeddingProvider> {
    pub fn http(config: EmbeddingProviderConfig) -> Result<Self, EmbedError> {
        let descriptor = format!("http:{}:{}", config.model_name, config.dim);
        let (batch, dim, par) = (config.batch_size, config.dim, config.parallelism);
        Ok(Self::new(HttpEmbeddingProvider::new(config)?, batch, dim, par, descriptor))
    }
}

impl<P: BatchProvider> Embedder for ProviderEmbedder<P> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        embed_texts(&self.provider, texts, self.batch_size, self.dim, self.parallelism)
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        calls: AtomicUsize,
        dim: usize,
    }

    impl BatchProvider for Counting {
        fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(batch
                .iter()
                .map(|t| {
                    let mut v = vec![0.0; self.dim];
                    v[t.len() % self.dim] = 2.0;
                    v
                })
                .collect())
        }
    }

    fn texts(n: usize) -> Vec<String> {
        (1..=n).map(|i| "x".repeat(i)).collect()
    }

    #[test]
    fn empty_input_makes_no_calls() {
        let p = Counting { calls: AtomicUsize::new(0), dim: 8 };
        assert!(embed_texts(&p, &[], 2, 8, 1).unwrap().is_empty());
        assert_eq!(p.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn batches_and_keeps_order() {
        for parallelism in [1, 2, 4] {
            let p = Counting { calls: AtomicUsize::new(0), dim: 8 };
            let out = embed_texts(&p, &texts(5), 2, 8, parallelism).unwrap();
            assert_eq!(p.calls.load(Ordering::SeqCst), 3);
            for (i, v) in out.iter().enumerate() {
                assert_eq!(v.as_slice()[(i + 1) % 8], 1.0, "normalized, in input order");
            }
        }
    }

    #[test]
    fn wrong_dimension_is_fatal() {
        let p = Counting { calls: AtomicUsize::new(0), dim: 8 };
        let err = embed_texts(&p, &texts(1), 2, 768, 1).unwrap_err();
        assert!(matches!(err, EmbedError::DimMismatch { expected: 768, got: 8 }));
        assert!(!err.is_retriable());
    }
}
