use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::cache::key_u64;
use crate::corpus::normalize;
use crate::http::{make_agent, post_json, BackendError};
use crate::stats::RngStream;

pub trait EmbeddingBackend: Send + Sync {
    /// One vector per input text, in order.
    fn embed(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;

    fn name(&self) -> &str;
}

/// OpenAI-compatible `POST {base_url}/embeddings`.
pub struct HttpEmbeddingBackend {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

impl HttpEmbeddingBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self { agent: make_agent(timeout), base_url: base_url.into().trim_end_matches('/').to_string(), api_key }
    }

    pub fn from_env(base_url: impl Into<String>, key_var: &str, timeout: Duration) -> Self {
        Self::new(base_url, std::env::var(key_var).ok().filter(|k| !k.is_empty()), timeout)
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl EmbeddingBackend for HttpEmbeddingBackend {
    fn embed(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let body = json!({ "model": model_id, "input": texts });
        let url = format!("{}/embeddings", self.base_url);
        let text = post_json(&self.agent, &url, self.api_key.as_deref(), &body)?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    fn name(&self) -> &str {
        "http"
    }
}

/// Seeded bag-of-words embedding: each normalized word hashes to a fixed
/// Gaussian vector and a text is the sum of its words' vectors.
pub struct MockEmbeddingBackend {
    dim: usize,
    seed: u64,
}

impl MockEmbeddingBackend {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim: dim.max(2), seed }
    }

    fn word_vector(&self, model_id: &str, word: &str) -> Vec<f64> {
        let mut rng = RngStream::new(key_u64(&[&self.seed.to_le_bytes(), model_id.as_bytes(), word.as_bytes()]), 0);
        (0..self.dim).map(|_| rng.standard_normal()).collect()
    }

    pub fn embed_one(&self, model_id: &str, text: &str) -> Vec<f64> {
        let mut words: Vec<String> = text.split_whitespace().map(normalize).filter(|w| !w.is_empty()).collect();
        if words.is_empty() {
            words.push(text.to_string());
        }
        let mut acc = vec![0.0; self.dim];
        for w in &words {
            for (a, x) in acc.iter_mut().zip(self.word_vector(model_id, w)) {
                *a += x;
            }
        }
        acc
    }
}

impl EmbeddingBackend for MockEmbeddingBackend {
    fn embed(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_one(model_id, t)).collect())
    }

    fn name(&self) -> &str {
        "mock"
    }
}
