//! LLM access for every prompting stage: templates, a deterministic mock
//! backend and a remote chat client.

pub mod mock;
pub mod remote;
mod template;

use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use mock::{MockBackend, MockReply, MockRule};
pub use remote::{ChatRequest, ChatResponse, RemoteChat, RetryPolicy};
pub use template::{render, render_text, FewShot, PromptSet, PromptTemplate, TemplateError};

/// Template names, one per pipeline stage.
pub mod stage {
    pub const ENTITY_DETECTION: &str = "entity_detection";
    pub const DRAFT_ANSWER: &str = "draft_answer";
    pub const SPLIT_CLAIMS: &str = "split_claims";
    pub const VERIFY_CLAIM: &str = "verify_claim";
    pub const SUMMARIZE_TEXT: &str = "summarize_text";
    pub const SUMMARIZE_TABLE: &str = "summarize_table";
    pub const FUSE_ANSWER: &str = "fuse_answer";
    pub const JUDGE_MATCH: &str = "judge_match";
}

/// Reply that means "nothing to report" in every stage contract.
pub const NONE_REPLY: &str = "None";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

/// A rendered prompt ready for a backend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub template: String,
    pub messages: Vec<ChatMessage>,
    pub bindings: BTreeMap<String, String>,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl CompletionRequest {
    /// The prompt as one string (messages joined by blank lines).
    pub fn text(&self) -> String {
        render_text(&self.messages)
    }

    pub fn binding(&self, slot: &str) -> &str {
        self.bindings.get(slot).map_or("", String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("LLM backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[async_trait]
pub trait LlmBackend: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

#[async_trait]
impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request).await
    }
}

/// A backend paired with the prompt set. This is the only way pipeline code
/// reaches a model.
#[derive(Clone)]
pub struct Llm {
    backend: Arc<dyn LlmBackend>,
    prompts: Arc<PromptSet>,
}

impl std::fmt::Debug for Llm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Llm").finish_non_exhaustive()
    }
}

impl Llm {
    pub fn new(backend: Arc<dyn LlmBackend>, prompts: PromptSet) -> Self {
        Self { backend, prompts: Arc::new(prompts) }
    }

    pub fn mock(backend: MockBackend) -> Self {
        Self::new(Arc::new(backend), PromptSet::builtin())
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    /// Renders `template` with `bindings` at temperature 0.
    pub fn request<K, V>(&self, template: &str, bindings: impl IntoIterator<Item = (K, V)>) -> Result<CompletionRequest, LlmError>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let bindings: BTreeMap<String, String> =
            bindings.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        let t = self.prompts.get(template)?;
        Ok(CompletionRequest {
            template: t.name.clone(),
            messages: t.render(&bindings)?,
            bindings,
            max_tokens: t.max_tokens,
            temperature: 0.0,
        })
    }

    pub async fn ask<K, V>(&self, template: &str, bindings: impl IntoIterator<Item = (K, V)>) -> Result<String, LlmError>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let request = self.request(template, bindings)?;
        let reply = self.backend.complete(&request).await?;
        tracing::trace!(template, reply = %reply, "llm reply");
        Ok(reply)
    }
}

/// True for an empty reply or the `None` sentinel.
pub fn is_none_reply(reply: &str) -> bool {
    let r = reply.trim().trim_end_matches('.');
    r.is_empty() || r.eq_ignore_ascii_case(NONE_REPLY)
}
