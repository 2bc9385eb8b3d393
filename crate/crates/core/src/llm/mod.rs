//! Segmentation prompts and chat-completion backends.

mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::http::BackendError;
pub use http::HttpChatBackend;
pub use mock::{MockChatBackend, MockCorruption};

use crate::cache::{cache_key, temperature_bytes, DiskCache};
use crate::corpus::Narrative;
use crate::retry::{Attempt, RetryPolicy};

pub const SEGMENTATION_INSTRUCTION: &str = "An event is an ongoing coherent situation. The following story needs to be copied and segmented into large events. Copy the following story word-for-word and start a new line whenever one event ends, and another begins. This is the story:";
pub const SEGMENTATION_REITERATION: &str =
    "This is a word-for-word copy of the same story that is segmented into large event units:";
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

pub fn build_segmentation_prompt(narrative_text: &str) -> Result<String, LlmError> {
    if narrative_text.is_empty() {
        return Err(LlmError::EmptyNarrative);
    }
    Ok(format!("{SEGMENTATION_INSTRUCTION}\n{narrative_text}\n{SEGMENTATION_REITERATION}"))
}

/// Inverse of [`build_segmentation_prompt`].
pub fn story_from_prompt(prompt: &str) -> Option<&str> {
    prompt
        .strip_prefix(SEGMENTATION_INSTRUCTION)?
        .strip_prefix('\n')?
        .strip_suffix(SEGMENTATION_REITERATION)?
        .strip_suffix('\n')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationRequest {
    pub narrative_id: String,
    pub model_id: String,
    pub temperature: f64,
    pub instance_index: usize,
    pub max_output_tokens: u32,
}

impl SegmentationRequest {
    pub fn new(narrative_id: impl Into<String>, model_id: impl Into<String>, temperature: f64, instance_index: usize) -> Self {
        Self {
            narrative_id: narrative_id.into(),
            model_id: model_id.into(),
            temperature,
            instance_index,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 1]", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn cache_key(&self, prompt: &str) -> String {
        cache_key(&[
            self.model_id.as_bytes(),
            prompt.as_bytes(),
            &temperature_bytes(self.temperature),
            &(self.instance_index as u64).to_le_bytes(),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRecord {
    pub request: SegmentationRequest,
    pub raw_text: String,
    pub retrieved_from_cache: bool,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("narrative text is empty")]
    EmptyNarrative,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend rejected the request (HTTP {status}): {message}")]
    Config { status: u16, message: String },
    #[error("gave up after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("completion truncated ({} chars received)", partial.len())]
    Truncated { partial: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("backend returned empty text")]
    EmptyResponse,
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("instances {failed:?} failed; first error: {first}")]
    InstancesFailed { failed: Vec<usize>, first: String },
}

impl From<(BackendError, u32)> for LlmError {
    fn from((e, attempts): (BackendError, u32)) -> Self {
        match e {
            BackendError::Status { status, body } if !(status == 429 || status >= 500) => {
                LlmError::Config { status, message: body }
            }
            BackendError::Status { status, body } => {
                LlmError::Transport { attempts, message: format!("HTTP {status}: {body}") }
            }
            BackendError::Transport(message) => LlmError::Transport { attempts, message },
            BackendError::Truncated { partial } => LlmError::Truncated { partial },
            BackendError::Malformed(m) => LlmError::Malformed(m),
        }
    }
}

/// A chat-completion endpoint taking one user message.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &SegmentationRequest, prompt: &str) -> Result<String, BackendError>;

    /// Short name for diagnostics.
    fn name(&self) -> &str;
}

/// Backend plus cache, retry policy and parallelism bound.
#[derive(Clone)]
pub struct LlmGateway {
    backend: Arc<dyn ChatBackend>,
    cache: Option<DiskCache>,
    retry: RetryPolicy,
    parallelism: usize,
    max_output_tokens: u32,
}

impl LlmGateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            parallelism: 4,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn with_max_output_tokens(mut self, max_output_tokens: u32) -> Self {
        self.max_output_tokens = max_output_tokens;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn complete(&self, request: &SegmentationRequest, prompt: &str) -> Result<CompletionRecord, LlmError> {
        request.validate()?;
        let key = request.cache_key(prompt);
        if let Some(cache) = &self.cache {
            if let Some(raw_text) = cache.get(&key)? {
                log::debug!("cache hit {key} for {}#{}", request.narrative_id, request.instance_index);
                return Ok(CompletionRecord {
                    request: request.clone(),
                    raw_text,
                    retrieved_from_cache: true,
                    timestamp: Utc::now(),
                });
            }
        }
        let raw_text = self.retry.run(|_| {
            self.backend.chat(request, prompt).map_err(|e| if e.is_transient() { Attempt::Retry(e) } else { Attempt::Fail(e) })
        })?;
        if raw_text.trim().is_empty() {
            return Err(LlmError::EmptyResponse);
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &raw_text)?;
        }
        Ok(CompletionRecord { request: request.clone(), raw_text, retrieved_from_cache: false, timestamp: Utc::now() })
    }

    /// One result per instance index, in index order, so callers can keep
    /// the successful completions when some instances fail.
    pub fn run_instances_partial(
        &self,
        narrative: &Narrative,
        model_id: &str,
        temperature: f64,
        n_instances: usize,
    ) -> Result<Vec<Result<CompletionRecord, LlmError>>, LlmError> {
        if n_instances == 0 {
            return Err(LlmError::InvalidRequest("n_instances must be at least 1".into()));
        }
        let prompt = build_segmentation_prompt(&narrative.text)?;
        let slots: Mutex<Vec<Option<Result<CompletionRecord, LlmError>>>> =
            Mutex::new((0..n_instances).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        thread::scope(|scope| {
            for _ in 0..self.parallelism.min(n_instances) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n_instances {
                        break;
                    }
                    let mut request = SegmentationRequest::new(&narrative.id, model_id, temperature, i);
                    request.max_output_tokens = self.max_output_tokens;
                    let result = self.complete(&request, &prompt);
                    slots.lock().unwrap()[i] = Some(result);
                });
            }
        });
        Ok(slots.into_inner().unwrap().into_iter().map(|s| s.expect("every index is claimed by a worker")).collect())
    }

    /// `n_instances` completions of the same prompt, ordered by instance index.
    pub fn run_instances(
        &self,
        narrative: &Narrative,
        model_id: &str,
        temperature: f64,
        n_instances: usize,
    ) -> Result<Vec<CompletionRecord>, LlmError> {
        let mut records = Vec::with_capacity(n_instances);
        let mut failed = Vec::new();
        let mut first = None;
        for (i, r) in self.run_instances_partial(narrative, model_id, temperature, n_instances)?.into_iter().enumerate() {
            match r {
                Ok(r) => records.push(r),
                Err(e) => {
                    failed.push(i);
                    first.get_or_insert_with(|| e.to_string());
                }
            }
        }
        match first {
            None => Ok(records),
            Some(first) => Err(LlmError::InstancesFailed { failed, first }),
        }
    }
}
