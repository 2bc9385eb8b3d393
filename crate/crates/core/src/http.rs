//! Blocking JSON-over-HTTP plumbing shared by the chat and embedding clients.

use std::time::Duration;

use thiserror::Error;

/// Failure of a single backend call, classified for the retry loop.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("response truncated at the output token limit")]
    Truncated { partial: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl BackendError {
    /// Transport failures, rate limits and server errors are worth repeating.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub(crate) fn make_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

/// POST a JSON body and return the response text, mapping failures onto [`BackendError`].
pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<String, BackendError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(|e| BackendError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
    if !(200..300).contains(&status) {
        return Err(BackendError::Status { status, body: text });
    }
    Ok(text)
}

