//! Chat client for a remote completion service.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{ChatMessage, CompletionRequest, LlmBackend, LlmError};
use crate::http::{self, CallError};

pub const ENDPOINT_ENV: &str = "HETQA_LLM_ENDPOINT";
pub const KEY_ENV: &str = "HETQA_LLM_KEY";
/// Default cap on requests in flight per backend.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

/// Attempts and exponential backoff between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base, 2*base, 4*base, ...
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.saturating_sub(1).min(16))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteChat {
    client: reqwest::Client,
    url: String,
    model: String,
    key: Option<String>,
    retry: RetryPolicy,
    permits: Arc<Semaphore>,
}

impl RemoteChat {
    pub fn new(endpoint: &str, model: &str, timeout: Duration) -> Self {
        Self {
            client: http::client(timeout),
            url: http::join_url(endpoint, "chat"),
            model: model.into(),
            key: None,
            retry: RetryPolicy::default(),
            permits: Arc::new(Semaphore::new(DEFAULT_MAX_IN_FLIGHT)),
        }
    }

    /// Endpoint and key from `HETQA_LLM_ENDPOINT` / `HETQA_LLM_KEY`.
    pub fn from_env(model: &str, timeout: Duration) -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|e| !e.is_empty())?;
        let chat = Self::new(&endpoint, model, timeout);
        Some(match std::env::var(KEY_ENV) {
            Ok(key) if !key.is_empty() => chat.with_key(key),
            _ => chat,
        })
    }

    pub fn with_key(mut self, key: impl Into<String>) -> Self {
        self.key = Some(key.into());
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.permits = Arc::new(Semaphore::new(n.max(1)));
        self
    }

    async fn call_once(&self, body: &ChatRequest) -> Result<ChatResponse, CallError> {
        let mut request = self.client.post(&self.url).json(body);
        if let Some(key) = &self.key {
            request = request.bearer_auth(key);
        }
        let response = request.send().await.map_err(|e| CallError::Unavailable(e.to_string()))?;
        http::decode(&self.url, response).await
    }
}

#[async_trait]
impl LlmBackend for RemoteChat {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let body = ChatRequest {
            model: self.model.clone(),
            messages: request.messages.clone(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.call_once(&body).await {
                Ok(reply) => return Ok(reply.content),
                Err(CallError::Unavailable(msg)) => {
                    tracing::debug!(attempt, error = %msg, "chat call failed");
                    last = msg;
                    if attempt < attempts {
                        tokio::time::sleep(self.retry.delay(attempt)).await;
                    }
                }
                Err(CallError::Protocol(msg)) => return Err(LlmError::BackendUnavailable(msg)),
            }
        }
        Err(LlmError::BackendUnavailable(format!("{} after {attempts} attempts: {last}", self.url)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_from_base() {
        let policy = RetryPolicy::default();
        assert_eq!(policy.delay(1), Duration::from_secs(1));
        assert_eq!(policy.delay(2), Duration::from_secs(2));
        assert_eq!(policy.delay(3), Duration::from_secs(4));
    }

    #[test]
    fn wire_shape() {
        let body = ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::new(super::super::Role::User, "hi")],
            temperature: 0.0,
            max_tokens: 5,
        };
        assert_eq!(
            serde_json::to_string(&body).unwrap(),
            r#"{"model":"m","messages":[{"role":"user","content":"hi"}],"temperature":0.0,"max_tokens":5}"#
        );
    }
}
