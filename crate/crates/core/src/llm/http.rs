use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, SegmentationRequest};
use crate::http::{make_agent, post_json, BackendError};

/// OpenAI-compatible `POST {base_url}/chat/completions`.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl HttpChatBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self { agent: make_agent(timeout), base_url: base_url.into().trim_end_matches('/').to_string(), api_key }
    }

    /// Reads the key from `key_var`; a missing variable means no `Authorization` header.
    pub fn from_env(base_url: impl Into<String>, key_var: &str, timeout: Duration) -> Self {
        Self::new(base_url, std::env::var(key_var).ok().filter(|k| !k.is_empty()), timeout)
    }
}

impl ChatBackend for HttpChatBackend {
    fn chat(&self, request: &SegmentationRequest, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let url = format!("{}/chat/completions", self.base_url);
        let text = post_json(&self.agent, &url, self.api_key.as_deref(), &body)?;
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| BackendError::Malformed("no choices".into()))?;
        let content = choice.message.content.unwrap_or_default();
        if choice.finish_reason.as_deref() == Some("length") {
            return Err(BackendError::Truncated { partial: content });
        }
        Ok(content)
    }

    fn name(&self) -> &str {
        "http"
    }
}
