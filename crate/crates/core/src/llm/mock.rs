//! Deterministic rule-table backend for tests, fixtures and offline runs.
//!
//! Rules are checked in order and the first match wins. A rule matches when
//! its template name (if any) equals the request's and each of its
//! substrings occurs in the request's final user turn (the part of the prompt that carries the
//! bindings; few-shot examples are not searched). Without a match the
//! optional stage heuristics run, and otherwise the reply is `None`.

use std::path::Path;
use std::sync::{Arc, LazyLock, Mutex};

use async_trait::async_trait;
use regex::Regex;
use serde::Deserialize;

use super::{stage, CompletionRequest, LlmBackend, LlmError, Role, NONE_REPLY};
use crate::eval::normalize;
use crate::index::index_terms;
use crate::wikitext::split_sentences;

pub type ReplyFn = Arc<dyn Fn(&CompletionRequest) -> String + Send + Sync>;

#[derive(Clone)]
pub enum MockReply {
    Text(String),
    /// Simulates a backend failure.
    Fail(String),
    Computed(ReplyFn),
}

impl std::fmt::Debug for MockReply {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Text(t) => f.debug_tuple("Text").field(t).finish(),
            Self::Fail(t) => f.debug_tuple("Fail").field(t).finish(),
            Self::Computed(_) => f.write_str("Computed(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockRule {
    pub template: Option<String>,
    /// All must occur; empty matches everything.
    pub contains: Vec<String>,
    pub reply: MockReply,
}

impl MockRule {
    fn matches(&self, request: &CompletionRequest, user_turn: &str) -> bool {
        self.template.as_deref().is_none_or(|t| t == "*" || t == request.template)
            && self.contains.iter().all(|c| user_turn.contains(c.as_str()))
    }
}

/// Rule as stored in a JSON rules file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    #[serde(default)]
    template: Option<String>,
    #[serde(default)]
    contains: OneOrMany,
    #[serde(default)]
    reply: Option<String>,
    #[serde(default)]
    fail: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

impl From<OneOrMany> for Vec<String> {
    fn from(c: OneOrMany) -> Self {
        match c {
            OneOrMany::None => Vec::new(),
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default)]
pub struct MockBackend {
    rules: Vec<MockRule>,
    heuristics: bool,
    calls: Mutex<Vec<String>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// A backend whose unmatched requests fall through to the stage
    /// heuristics (see [`heuristic_reply`]).
    pub fn with_heuristics() -> Self {
        Self { heuristics: true, ..Self::default() }
    }

    pub fn heuristics(mut self, on: bool) -> Self {
        self.heuristics = on;
        self
    }

    /// Adds a rule; `template` of `None` matches any stage.
    pub fn rule(mut self, template: Option<&str>, contains: &str, reply: impl Into<String>) -> Self {
        self.rules.push(MockRule {
            template: template.map(String::from),
            contains: vec![contains.into()],
            reply: MockReply::Text(reply.into()),
        });
        self
    }

    pub fn failing(mut self, template: Option<&str>, contains: &str) -> Self {
        self.rules.push(MockRule {
            template: template.map(String::from),
            contains: vec![contains.into()],
            reply: MockReply::Fail(format!("mock failure for {}", template.unwrap_or("*"))),
        });
        self
    }

    pub fn computed(
        mut self,
        template: Option<&str>,
        contains: &str,
        f: impl Fn(&CompletionRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        self.rules.push(MockRule {
            template: template.map(String::from),
            contains: vec![contains.into()],
            reply: MockReply::Computed(Arc::new(f)),
        });
        self
    }

    pub fn push_rule(&mut self, rule: MockRule) {
        self.rules.push(rule);
    }

    /// Appends rules from a JSON array of
    /// `{"template": str?, "contains": str | [str], "reply": str}` or
    /// `{"template": str?, "contains": str | [str], "fail": true}`.
    pub fn load_rules(mut self, path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let specs: Vec<RuleSpec> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        for spec in specs {
            let reply = match (spec.fail, spec.reply) {
                (true, _) => MockReply::Fail("mock failure".into()),
                (false, Some(r)) => MockReply::Text(r),
                (false, None) => return Err(format!("{}: rule without reply", path.display())),
            };
            self.rules.push(MockRule { template: spec.template, contains: spec.contains.into(), reply });
        }
        Ok(self)
    }

    /// Template names of every request seen so far, in order.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().expect("call log lock").clone()
    }

    /// The reply this backend gives, without recording a call.
    pub fn reply_for(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let user_turn = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str());
        if let Some(rule) = self.rules.iter().find(|r| r.matches(request, user_turn)) {
            return match &rule.reply {
                MockReply::Text(t) => Ok(t.clone()),
                MockReply::Fail(m) => Err(LlmError::BackendUnavailable(m.clone())),
                MockReply::Computed(f) => Ok(f(request)),
            };
        }
        if self.heuristics {
            if let Some(reply) = heuristic_reply(request) {
                return Ok(reply);
            }
        }
        Ok(NONE_REPLY.to_string())
    }
}

#[async_trait]
impl LlmBackend for MockBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.lock().expect("call log lock").push(request.template.clone());
        self.reply_for(request)
    }
}

static EVIDENCE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[([^\]]+)\]\s*(.*)$").unwrap());
static POOL_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\d+\.\s*\(([A-Z_]+)\)\s*(.*)$").unwrap());
static KB_SPAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"" is: (.*)\.$"#).unwrap());

/// Deterministic stand-ins for each stage:
///
/// * `split_claims`: one claim per sentence of the draft.
/// * `verify_claim`: SUPPORTED when the normalized claim is a substring of a
///   normalized evidence passage, citing every such passage.
/// * `summarize_*`: the sentence (or table row) sharing the most non-stopword
///   terms with the question; `None` when nothing is shared.
/// * `fuse_answer`: the first evidence item's answer span (the KB answer
///   after `is:`, otherwise the statement without its final period).
/// * `judge_match`: Yes when the two answers have the same normalized tokens,
///   ignoring "and".
pub fn heuristic_reply(request: &CompletionRequest) -> Option<String> {
    match request.template.as_str() {
        stage::SPLIT_CLAIMS => {
            let claims = split_sentences(request.binding("draft"));
            Some(if claims.is_empty() { NONE_REPLY.into() } else { claims.join("\n") })
        }
        stage::VERIFY_CLAIM => Some(substring_entailment(request.binding("claim"), request.binding("evidence"))),
        stage::SUMMARIZE_TEXT | stage::SUMMARIZE_TABLE => Some(extractive_summary(
            request.binding("question"),
            request.binding("passage"),
            request.template == stage::SUMMARIZE_TABLE,
        )),
        stage::FUSE_ANSWER => Some(first_answer_span(request.binding("evidence"))),
        stage::JUDGE_MATCH => {
            let same = token_bag(request.binding("gold")) == token_bag(request.binding("prediction"));
            Some(if same { "Yes" } else { "No" }.into())
        }
        _ => None,
    }
}

fn substring_entailment(claim: &str, evidence: &str) -> String {
    let claim = normalize(claim);
    if claim.is_empty() {
        return "NOT_ENOUGH_INFO".into();
    }
    let ids: Vec<&str> = evidence
        .lines()
        .filter_map(|line| EVIDENCE_LINE.captures(line))
        .filter(|caps| normalize(&caps[2]).contains(&claim))
        .map(|caps| caps.get(1).expect("id group").as_str())
        .collect();
    if ids.is_empty() {
        "NOT_ENOUGH_INFO".into()
    } else {
        format!("SUPPORTED [{}]", ids.join(", "))
    }
}

fn extractive_summary(question: &str, passage: &str, table: bool) -> String {
    let wanted: std::collections::HashSet<String> = index_terms(question).into_iter().collect();
    let units: Vec<String> = if table {
        passage
            .split("<tr>")
            .map(str::trim)
            .filter(|u| !u.is_empty())
            .map(String::from)
            .collect()
    } else {
        split_sentences(passage)
    };
    let mut best: Option<(usize, &String)> = None;
    for unit in &units {
        let terms: std::collections::HashSet<String> = index_terms(unit).into_iter().collect();
        let score = terms.intersection(&wanted).count();
        if score > 0 && best.is_none_or(|(s, _)| score > s) {
            best = Some((score, unit));
        }
    }
    best.map_or_else(|| NONE_REPLY.to_string(), |(_, unit)| unit.clone())
}

fn first_answer_span(evidence: &str) -> String {
    for line in evidence.lines() {
        let Some(caps) = POOL_LINE.captures(line) else { continue };
        let text = caps[2].trim();
        let span = if &caps[1] == "KB" {
            KB_SPAN.captures(text).map(|c| c[1].trim().to_string()).unwrap_or_default()
        } else {
            text.trim_end_matches('.').trim().to_string()
        };
        if !span.is_empty() {
            return span;
        }
    }
    crate::fusion::NO_ANSWER.to_string()
}

fn token_bag(text: &str) -> Vec<String> {
    let mut tokens: Vec<String> = normalize(text)
        .split_whitespace()
        .filter(|t| *t != "and")
        .map(String::from)
        .collect();
    tokens.sort();
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Llm;

    #[tokio::test]
    async fn rule_table_first_match_wins_and_defaults_to_none() {
        let llm = Llm::mock(
            MockBackend::new()
                .rule(None, "voice type", "baritone")
                .rule(None, "voice", "tenor"),
        );
        let reply = llm.ask(stage::DRAFT_ANSWER, [("question", "What is the voice type of Bob Dylan?")]).await.unwrap();
        assert_eq!(reply, "baritone");
        let reply = llm.ask(stage::DRAFT_ANSWER, [("question", "Who founded Nirvana?")]).await.unwrap();
        assert_eq!(reply, "None");
    }

    #[tokio::test]
    async fn template_scoped_rules_and_failures() {
        let backend = MockBackend::new()
            .rule(Some(stage::JUDGE_MATCH), "", "Yes")
            .failing(Some(stage::DRAFT_ANSWER), "");
        let llm = Llm::mock(backend);
        let judged = llm.ask(stage::JUDGE_MATCH, [("question", "q"), ("gold", "g"), ("prediction", "p")]).await.unwrap();
        assert_eq!(judged, "Yes");
        let err = llm.ask(stage::DRAFT_ANSWER, [("question", "q")]).await.unwrap_err();
        assert!(matches!(err, LlmError::BackendUnavailable(_)));
    }

    #[tokio::test]
    async fn few_shot_text_is_not_matched() {
        // "baritone" only appears in the fuse prompt's few-shot example.
        let llm = Llm::mock(MockBackend::new().rule(None, "baritone", "matched"));
        let reply = llm.ask(stage::FUSE_ANSWER, [("question", "q"), ("evidence", "1. (TEXT) x")]).await.unwrap();
        assert_eq!(reply, "None");
    }

    #[test]
    fn identical_requests_give_identical_replies() {
        let backend = MockBackend::with_heuristics();
        let llm = Llm::mock(MockBackend::new());
        let req = llm.request(stage::SUMMARIZE_TEXT, [("question", "Who founded Nirvana?"), ("title", "t"), ("passage", "Nirvana was founded by Kurt Cobain. Grunge is loud.")]).unwrap();
        let a = backend.reply_for(&req).unwrap();
        assert_eq!(a, backend.reply_for(&req).unwrap());
        assert_eq!(a, "Nirvana was founded by Kurt Cobain.");
    }

    #[test]
    fn heuristic_stage_behaviour() {
        let llm = Llm::mock(MockBackend::new());
        let req = |t: &str, b: &[(&str, &str)]| llm.request(t, b.iter().copied()).unwrap();

        let split = heuristic_reply(&req(stage::SPLIT_CLAIMS, &[("draft", "A was born in 1961. A wrote B.")])).unwrap();
        assert_eq!(split, "A was born in 1961.\nA wrote B.");

        let ev = "[d1] Roy was born in 1961 in Shillong.\n[d2] Unrelated.";
        let verdict = heuristic_reply(&req(stage::VERIFY_CLAIM, &[("claim", "Roy was born in 1961"), ("evidence", ev)])).unwrap();
        assert_eq!(verdict, "SUPPORTED [d1]");

        let summary = heuristic_reply(&req(stage::SUMMARIZE_TEXT, &[("question", "baritone?"), ("title", ""), ("passage", "Nothing here.")])).unwrap();
        assert_eq!(summary, "None");

        let pool = "1. (KB) Wikidata says the answer to \"q\" is: .\n2. (TEXT) Kurt Cobain founded Nirvana.";
        assert_eq!(first_answer_span(pool), "Kurt Cobain founded Nirvana");
        let pool = "1. (KB) Wikidata says the answer to \"q\" is: baritone.";
        assert_eq!(first_answer_span(pool), "baritone");

        let judged = heuristic_reply(&req(stage::JUDGE_MATCH, &[("question", "q"), ("gold", "Trent Reznor Atticus Ross"), ("prediction", "Trent Reznor and Atticus Ross")])).unwrap();
        assert_eq!(judged, "Yes");
    }

    #[test]
    fn rules_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.json");
        std::fs::write(&path, r#"[{"template":"fuse_answer","contains":"Cobain","reply":"Kurt Cobain"},{"contains":"boom","fail":true},{"contains":["a","b"],"reply":"both"}]"#).unwrap();
        let backend = MockBackend::new().load_rules(&path).unwrap();
        assert_eq!(backend.rules.len(), 3);
        let llm = Llm::mock(MockBackend::new());
        let req = |q: &str| llm.request(stage::DRAFT_ANSWER, [("question", q)]).unwrap();
        assert_eq!(backend.reply_for(&req("a only")).unwrap(), "None");
        assert_eq!(backend.reply_for(&req("a and b")).unwrap(), "both");
        std::fs::write(&path, r#"[{"contains":"x"}]"#).unwrap();
        assert!(MockBackend::new().load_rules(&path).is_err());
    }
}
