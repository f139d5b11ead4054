//! Minimal client for chat-completions style HTTP endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const URL_ENV: &str = "NESY_MODEL_URL";
pub const KEY_ENV: &str = "NESY_MODEL_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    /// Full URL of the completions endpoint.
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

impl ChatConfig {
    /// Endpoint and key from `NESY_MODEL_URL` / `NESY_MODEL_KEY`.
    pub fn from_env(model: &str) -> Result<Self, ChatError> {
        let endpoint = std::env::var(URL_ENV).map_err(|_| ChatError::NotConfigured(URL_ENV))?;
        Ok(ChatConfig {
            endpoint,
            model: model.to_string(),
            api_key: std::env::var(KEY_ENV).ok(),
            temperature: 0.0,
            reasoning_effort: None,
            timeout_secs: default_timeout(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error("{0} is not set")]
    NotConfigured(&'static str),
    #[error("request failed: {0}")]
    Http(String),
    #[error("endpoint answered with status {0}")]
    Status(u16),
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

impl From<ureq::Error> for ChatError {
    fn from(e: ureq::Error) -> Self {
        match e {
            ureq::Error::StatusCode(code) => ChatError::Status(code),
            other => ChatError::Http(other.to_string()),
        }
    }
}

pub struct ChatClient {
    config: ChatConfig,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(config: ChatConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        ChatClient { config, agent }
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        if let Some(effort) = &self.config.reasoning_effort {
            body["reasoning_effort"] = json!(effort);
        }
        body
    }

    /// Sends one request and returns the first choice's message text.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, ChatError> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(self.request_body(messages))?;
        let value: Value = resp.body_mut().read_json()?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ChatError::BadResponse(truncate(&value.to_string(), 200)))
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
