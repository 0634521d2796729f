//! Draft answers, claim splitting and claim verification. Only claims a
//! verifier marks SUPPORTED with at least one retrieved passage survive.

use std::collections::HashSet;
use std::sync::LazyLock;

use futures::future::join_all;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::fusion::{EvidenceItem, EvidenceKind};
use crate::index::Hit;
use crate::llm::{is_none_reply, stage, Llm, LlmError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub text: String,
    pub draft_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictLabel {
    Supported,
    Refuted,
    NotEnoughInfo,
}

/// `supporting_ids` is non-empty exactly when the label is SUPPORTED.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub supporting_ids: Vec<String>,
}

impl Verdict {
    pub fn not_enough_info() -> Self {
        Self { label: VerdictLabel::NotEnoughInfo, supporting_ids: Vec::new() }
    }

    pub fn refuted() -> Self {
        Self { label: VerdictLabel::Refuted, supporting_ids: Vec::new() }
    }

    pub fn is_supported(&self) -> bool {
        self.label == VerdictLabel::Supported && !self.supporting_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundingError {
    #[error("{claims} claims but {verdicts} verdicts")]
    LengthMismatch { claims: usize, verdicts: usize },
}

static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s*").unwrap());
static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\]]*)\]").unwrap());

/// A free-text answer; a `None` reply counts as empty.
pub async fn draft_answer(question: &str, llm: &Llm) -> Result<String, LlmError> {
    let reply = llm.ask(stage::DRAFT_ANSWER, [("question", question)]).await?;
    Ok(if is_none_reply(&reply) { String::new() } else { reply.trim().to_string() })
}

/// One claim per non-empty reply line, list markers removed. Failures and
/// `None` give no claims.
pub async fn split_claims(draft: &str, llm: &Llm) -> Vec<Claim> {
    if draft.trim().is_empty() {
        return Vec::new();
    }
    let reply = match llm.ask(stage::SPLIT_CLAIMS, [("draft", draft)]).await {
        Ok(r) => r,
        Err(e) => {
            tracing::debug!(error = %e, "claim splitting failed");
            return Vec::new();
        }
    };
    reply
        .lines()
        .map(|l| LIST_MARKER.replace(l, "").trim().to_string())
        .filter(|l| !is_none_reply(l))
        .enumerate()
        .map(|(draft_index, text)| Claim { text, draft_index })
        .collect()
}

/// Hits as `[doc_id] text` lines for the verifier prompt.
pub fn render_hits(hits: &[Hit]) -> String {
    hits.iter().map(|h| format!("[{}] {}", h.doc_id, h.text)).collect::<Vec<_>>().join("\n")
}

/// Reads `SUPPORTED [id, ...]`, `REFUTED` or anything else (not enough info).
/// Cited ids not among `hits` are ignored; SUPPORTED without a valid id is
/// not enough info.
pub fn parse_verdict(reply: &str, hits: &[Hit]) -> Verdict {
    let reply = reply.trim();
    let upper = reply.to_ascii_uppercase();
    if upper.starts_with("REFUTED") {
        return Verdict::refuted();
    }
    if !upper.starts_with("SUPPORTED") {
        return Verdict::not_enough_info();
    }
    let known: HashSet<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
    let mut ids: Vec<String> = Vec::new();
    for caps in BRACKETED.captures_iter(reply) {
        for id in caps[1].split(',').map(str::trim) {
            if known.contains(id) && !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
            }
        }
    }
    if ids.is_empty() {
        Verdict::not_enough_info()
    } else {
        Verdict { label: VerdictLabel::Supported, supporting_ids: ids }
    }
}

/// Checks `claim` against `hits` only. No hits, or a failed call, means not
/// enough info.
pub async fn verify(claim: &Claim, hits: &[Hit], llm: &Llm) -> Verdict {
    if hits.is_empty() {
        return Verdict::not_enough_info();
    }
    let evidence = render_hits(hits);
    match llm.ask(stage::VERIFY_CLAIM, [("evidence", evidence.as_str()), ("claim", claim.text.as_str())]).await {
        Ok(reply) => parse_verdict(&reply, hits),
        Err(e) => {
            tracing::debug!(error = %e, "verification failed");
            Verdict::not_enough_info()
        }
    }
}

/// The SUPPORTED claims in draft order, as LLM_CLAIM evidence.
pub fn filter_verified(claims: &[Claim], verdicts: &[Verdict]) -> Result<Vec<EvidenceItem>, GroundingError> {
    if claims.len() != verdicts.len() {
        return Err(GroundingError::LengthMismatch { claims: claims.len(), verdicts: verdicts.len() });
    }
    Ok(claims
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| v.is_supported())
        .map(|(c, v)| EvidenceItem::new(EvidenceKind::LlmClaim, c.text.clone()).with_origin(&v.supporting_ids[0]))
        .collect())
}

/// Verifies every claim concurrently and keeps the grounded ones.
pub async fn grounded_claims(claims: &[Claim], hits: &[Hit], llm: &Llm) -> Vec<EvidenceItem> {
    let verdicts = join_all(claims.iter().map(|c| verify(c, hits, llm))).await;
    filter_verified(claims, &verdicts).expect("one verdict per claim")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::PassageKind;
    use crate::llm::MockBackend;

    fn hit(id: &str, text: &str) -> Hit {
        Hit { doc_id: id.into(), title: String::new(), score: 1.0, kind: PassageKind::Text, text: text.into() }
    }

    fn claim(text: &str, i: usize) -> Claim {
        Claim { text: text.into(), draft_index: i }
    }

    #[tokio::test]
    async fn splitting() {
        let llm = Llm::mock(MockBackend::with_heuristics());
        assert!(split_claims("", &llm).await.is_empty());
        let claims = split_claims("A was born in 1961. A wrote B.", &llm).await;
        assert_eq!(claims, vec![claim("A was born in 1961.", 0), claim("A wrote B.", 1)]);
        assert_eq!(split_claims("Only one claim here.", &llm).await.len(), 1);
        let failing = Llm::mock(MockBackend::new().failing(None, ""));
        assert!(split_claims("A. B.", &failing).await.is_empty());
    }

    #[tokio::test]
    async fn verification() {
        let llm = Llm::mock(MockBackend::with_heuristics());
        let hits = [hit("t1", "Arundhati Roy was born in Shillong in 1961."), hit("t2", "Other text.")];
        let v = verify(&claim("Roy was born in Shillong", 0), &hits, &llm).await;
        assert_eq!(v, Verdict { label: VerdictLabel::Supported, supporting_ids: vec!["t1".into()] });
        assert_eq!(verify(&claim("x", 0), &[], &llm).await, Verdict::not_enough_info());
        let refuting = Llm::mock(MockBackend::new().rule(Some(stage::VERIFY_CLAIM), "Delhi", "REFUTED"));
        assert_eq!(verify(&claim("Roy was born in Delhi", 0), &hits, &refuting).await, Verdict::refuted());
        let failing = Llm::mock(MockBackend::new().failing(None, ""));
        assert_eq!(verify(&claim("x", 0), &hits, &failing).await, Verdict::not_enough_info());
    }

    #[test]
    fn verdict_parsing_is_fail_closed() {
        let hits = [hit("a", ""), hit("b", "")];
        assert_eq!(parse_verdict("SUPPORTED [a, zzz]", &hits).supporting_ids, vec!["a"]);
        assert_eq!(parse_verdict("SUPPORTED [zzz]", &hits), Verdict::not_enough_info());
        assert_eq!(parse_verdict("SUPPORTED", &hits), Verdict::not_enough_info());
        assert_eq!(parse_verdict("maybe", &hits), Verdict::not_enough_info());
    }

    #[test]
    fn filtering() {
        let claims = [claim("s1", 0), claim("n", 1), claim("s2", 2)];
        let s = Verdict { label: VerdictLabel::Supported, supporting_ids: vec!["d".into()] };
        let n = Verdict::not_enough_info();
        let kept = filter_verified(&claims, &[s.clone(), n.clone(), s.clone()]).unwrap();
        assert_eq!(kept.iter().map(|e| e.text.as_str()).collect::<Vec<_>>(), vec!["s1", "s2"]);
        assert!(filter_verified(&claims, &[n.clone(), n.clone(), n.clone()]).unwrap().is_empty());
        let dup = [claim("x", 0), claim("x", 1)];
        assert_eq!(filter_verified(&dup, &[s.clone(), s.clone()]).unwrap().len(), 2);
        assert!(filter_verified(&claims, &[s]).is_err());
    }
}
