//! Evidence pool assembly, per-hit summarization and final answer generation.

use futures::future::join_all;
use serde_json::ser::PrettyFormatter;
use serde::{Deserialize, Serialize};

use crate::index::{Hit, PassageKind};
use crate::llm::{is_none_reply, stage, Llm};

/// Answer given when there is nothing to answer from, or the answer stage fails.
pub const NO_ANSWER: &str = "Information not available";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvidenceKind {
    Kb,
    Text,
    Table,
    Infobox,
    LlmClaim,
}

impl EvidenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Kb => "KB",
            Self::Text => "TEXT",
            Self::Table => "TABLE",
            Self::Infobox => "INFOBOX",
            Self::LlmClaim => "LLM_CLAIM",
        }
    }

    /// Position in the pool: KB, TEXT, TABLE/INFOBOX, LLM_CLAIM.
    pub fn rank(self) -> u8 {
        match self {
            Self::Kb => 0,
            Self::Text => 1,
            Self::Table | Self::Infobox => 2,
            Self::LlmClaim => 3,
        }
    }
}

impl From<PassageKind> for EvidenceKind {
    fn from(kind: PassageKind) -> Self {
        match kind {
            PassageKind::Text => Self::Text,
            PassageKind::Table => Self::Table,
            PassageKind::Infobox => Self::Infobox,
        }
    }
}

impl std::fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub kind: EvidenceKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_id: Option<String>,
}

impl EvidenceItem {
    pub fn new(kind: EvidenceKind, text: impl Into<String>) -> Self {
        Self { kind, text: text.into(), origin_id: None }
    }

    pub fn with_origin(mut self, doc_id: impl Into<String>) -> Self {
        self.origin_id = Some(doc_id.into());
        self
    }

    /// A KB statement whose answer list is empty (`... is: .`).
    pub fn is_empty_kb(&self) -> bool {
        self.kind == EvidenceKind::Kb && self.text.ends_with(" is: .")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidencePool {
    pub question: String,
    pub items: Vec<EvidenceItem>,
}

impl EvidencePool {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// True when at least one item could carry an answer.
    pub fn is_informative(&self) -> bool {
        self.items.iter().any(|i| !i.is_empty_kb())
    }

    pub fn of_kind(&self, kind: EvidenceKind) -> impl Iterator<Item = &EvidenceItem> {
        self.items.iter().filter(move |i| i.kind == kind)
    }

    /// Evidence as the numbered list shown to the answer prompt.
    pub fn render(&self) -> String {
        self.items
            .iter()
            .enumerate()
            .map(|(i, item)| format!("{}. ({}) {}", i + 1, item.kind, item.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Orders evidence as KB, TEXT, TABLE/INFOBOX, LLM_CLAIM, keeping the given
/// order within each group, and drops blank items and exact duplicate texts
/// (the first occurrence stays).
pub fn assemble(
    question: &str,
    kb: Option<EvidenceItem>,
    text: Vec<EvidenceItem>,
    tables: Vec<EvidenceItem>,
    claims: Vec<EvidenceItem>,
) -> EvidencePool {
    let mut items: Vec<EvidenceItem> = kb.into_iter().chain(text).chain(tables).chain(claims).collect();
    items.sort_by_key(|i| i.kind.rank());
    let mut seen = std::collections::HashSet::new();
    items.retain(|i| !i.text.trim().is_empty() && seen.insert(i.text.clone()));
    EvidencePool { question: question.into(), items }
}

/// Asks the summarizer what `hit` says about `question`. `None` when the
/// model declares the passage irrelevant or the call fails.
pub async fn summarize_hit(question: &str, hit: &Hit, llm: &Llm) -> Option<EvidenceItem> {
    let template = match hit.kind {
        PassageKind::Text => stage::SUMMARIZE_TEXT,
        PassageKind::Table | PassageKind::Infobox => stage::SUMMARIZE_TABLE,
    };
    let bindings = [("question", question), ("title", hit.title.as_str()), ("passage", hit.text.as_str())];
    match llm.ask(template, bindings).await {
        Ok(reply) if !is_none_reply(&reply) => {
            Some(EvidenceItem::new(hit.kind.into(), reply.trim()).with_origin(&hit.doc_id))
        }
        Ok(_) => None,
        Err(e) => {
            tracing::debug!(doc_id = %hit.doc_id, error = %e, "summarizer failed, hit dropped");
            None
        }
    }
}

/// Summarizes hits concurrently; output keeps hit order.
pub async fn summarize_hits(question: &str, hits: &[Hit], llm: &Llm) -> Vec<EvidenceItem> {
    join_all(hits.iter().map(|h| summarize_hit(question, h, llm)))
        .await
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalAnswer {
    pub text: String,
    pub pool: EvidencePool,
}

/// Generates the answer from the pool. A pool with nothing informative, a
/// `None` reply, or a failed call all give [`NO_ANSWER`].
pub async fn final_answer(question: &str, pool: EvidencePool, llm: &Llm) -> FinalAnswer {
    if !pool.is_informative() {
        return FinalAnswer { text: NO_ANSWER.into(), pool };
    }
    let evidence = pool.render();
    let text = match llm.ask(stage::FUSE_ANSWER, [("question", question), ("evidence", evidence.as_str())]).await {
        Ok(reply) => {
            let line = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
            if is_none_reply(line) {
                NO_ANSWER.to_string()
            } else {
                line.to_string()
            }
        }
        Err(e) => {
            tracing::debug!(error = %e, "answer generation failed");
            NO_ANSWER.to_string()
        }
    };
    FinalAnswer { text, pool }
}

/// A pipeline output in the `[kind, text]` evidence-pair shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    pub answer_generated: String,
    pub evidences: Vec<(EvidenceKind, String)>,
}

impl Prediction {
    pub fn new(answer: &FinalAnswer, gold: Option<String>) -> Self {
        Self {
            question: answer.pool.question.clone(),
            gold,
            answer_generated: answer.text.clone(),
            evidences: answer.pool.items.iter().map(|i| (i.kind, i.text.clone())).collect(),
        }
    }

    pub fn evidence_of(&self, kind: EvidenceKind) -> impl Iterator<Item = &str> {
        self.evidences.iter().filter(move |(k, _)| *k == kind).map(|(_, t)| t.as_str())
    }

    /// Four-space indented JSON.
    pub fn to_pretty_json(&self) -> String {
        pretty_json(self)
    }

    /// Single-line JSON, one record of a predictions file.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("prediction serializes")
    }
}

/// JSON indented by four spaces.
pub fn pretty_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PrettyFormatter::with_indent(b"    "));
    value.serialize(&mut ser).expect("value serializes to JSON");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}
