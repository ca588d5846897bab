//! Minimal client for OpenAI-compatible chat-completion endpoints, shared by
//! the live rewrite and generation adapters.

use std::env;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_URL: &str = "PF_LLM_URL";
pub const ENV_KEY: &str = "PF_LLM_KEY";
pub const ENV_MODEL: &str = "PF_LLM_MODEL";

const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdapterError {
    #[error("adapter not configured: {0}")]
    NotConfigured(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmEndpoint {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl LlmEndpoint {
    /// Reads `PF_LLM_URL` (required), `PF_LLM_KEY` and `PF_LLM_MODEL`.
    pub fn from_env() -> Result<Self, AdapterError> {
        let url = env::var(ENV_URL)
            .map_err(|_| AdapterError::NotConfigured(format!("{ENV_URL} is not set")))?;
        Ok(Self {
            url,
            api_key: env::var(ENV_KEY).ok().filter(|k| !k.is_empty()),
            model: env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
            timeout: Duration::from_secs(120),
        })
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0,
        })
    }

    pub fn chat(&self, messages: &[ChatMessage]) -> Result<String, AdapterError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut request = agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(self.request_body(messages))
            .map_err(|e| AdapterError::Transport(e.to_string()))?;
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| AdapterError::BadResponse(e.to_string()))?;
        extract_content(&body)
    }
}

/// `choices[0].message.content` of a chat-completion response.
pub fn extract_content(body: &Value) -> Result<String, AdapterError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| AdapterError::BadResponse("missing choices[0].message.content".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_shape() {
        let endpoint = LlmEndpoint {
            url: "http://localhost:1/v1/chat/completions".into(),
            api_key: None,
            model: "m".into(),
            timeout: Duration::from_secs(1),
        };
        let body = endpoint.request_body(&[
            ChatMessage::new(Role::System, "sys"),
            ChatMessage::new(Role::User, "hi"),
        ]);
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "hi");
    }

    #[test]
    fn content_extraction() {
        let ok = json!({"choices": [{"message": {"role": "assistant", "content": "1. hi"}}]});
        assert_eq!(extract_content(&ok).unwrap(), "1. hi");
        assert!(matches!(
            extract_content(&json!({"choices": []})),
            Err(AdapterError::BadResponse(_))
        ));
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let endpoint = LlmEndpoint {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key: Some("k".into()),
            model: "m".into(),
            timeout: Duration::from_secs(2),
        };
        let err = endpoint
            .chat(&[ChatMessage::new(Role::User, "hi")])
            .unwrap_err();
        assert!(matches!(err, AdapterError::Transport(_)), "{err:?}");
    }
}
