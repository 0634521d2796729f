//! Knowledge-base path: semantic parse, entity substitution, SPARQL
//! execution and the KB evidence statement.

use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::entity::{is_qid, EntitySet};
use crate::fusion::{EvidenceItem, EvidenceKind};
use crate::http::{self, CallError};

/// Default per-call budget against remote KB services.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(15);

/// Opening sigil of a mention placeholder, `[[surface]]`.
pub const PLACEHOLDER_OPEN: &str = "[[";

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\[([^\[\]]*)\]\]").unwrap());
static ENTITY_URI: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"/entity/(Q[0-9]+)$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KbError {
    #[error("semantic parser unavailable: {0}")]
    ParseUnavailable(String),
    #[error("no linked entity for mention {0:?}")]
    UnresolvedMention(String),
    #[error("SPARQL execution failed: {0}")]
    ExecutionFailed(String),
}

/// SPARQL with `[[surface]]` placeholders where entity ids go.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticParse {
    pub raw_query: String,
    pub mentions_used: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseEntity {
    pub surface: String,
    pub kb_id: String,
}

/// `POST /parse` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParseRequest {
    pub question: String,
    #[serde(default)]
    pub entities: Vec<ParseEntity>,
}

/// `POST /parse` response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseResponse {
    pub sparql: String,
    #[serde(default)]
    pub mentions: Vec<String>,
}

/// Client for a semantic parser speaking the `/parse` protocol.
#[derive(Debug, Clone)]
pub struct SemanticParser {
    client: reqwest::Client,
    url: String,
}

impl SemanticParser {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        Self { client: http::client(timeout), url: http::join_url(endpoint, "parse") }
    }

    pub async fn parse_query(&self, question: &str, entities: &EntitySet) -> Result<SemanticParse, KbError> {
        if question.trim().is_empty() {
            return Err(KbError::ParseUnavailable("empty question".into()));
        }
        let request = ParseRequest {
            question: question.into(),
            entities: entities
                .entities
                .iter()
                .map(|e| ParseEntity { surface: e.surface.clone(), kb_id: e.kb_id.clone() })
                .collect(),
        };
        let response: ParseResponse = http::post_json(&self.client, &self.url, &request)
            .await
            .map_err(|e| match e {
                CallError::Unavailable(m) | CallError::Protocol(m) => KbError::ParseUnavailable(m),
            })?;
        if response.sparql.trim().is_empty() {
            return Err(KbError::ParseUnavailable(format!("empty parse for {question:?}")));
        }
        Ok(SemanticParse { raw_query: response.sparql, mentions_used: response.mentions })
    }
}

/// Replaces every `[[surface]]` with the id of the entity whose surface (or
/// label) matches case-insensitively.
pub fn substitute_entities(parse: &SemanticParse, entities: &EntitySet) -> Result<String, KbError> {
    let lookup = |surface: &str| {
        let s = surface.trim();
        entities
            .entities
            .iter()
            .find(|e| e.surface.eq_ignore_ascii_case(s))
            .or_else(|| entities.entities.iter().find(|e| e.label.eq_ignore_ascii_case(s)))
            .map(|e| e.kb_id.clone())
    };
    let mut unresolved = None;
    let query = PLACEHOLDER.replace_all(&parse.raw_query, |caps: &regex::Captures| match lookup(&caps[1]) {
        Some(id) => id,
        None => {
            unresolved.get_or_insert_with(|| caps[1].to_string());
            String::new()
        }
    });
    if let Some(surface) = unresolved {
        return Err(KbError::UnresolvedMention(surface));
    }
    Ok(query.into_owned())
}

/// Answers of one query: entity ids with aligned labels, or a yes/no.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbResult {
    pub kb_ids: Vec<String>,
    pub labels: Vec<String>,
    pub boolean_answer: Option<bool>,
}

impl KbResult {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn boolean(answer: bool) -> Self {
        Self { boolean_answer: Some(answer), ..Self::default() }
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let (kb_ids, labels) = pairs.into_iter().map(|(a, b)| (a.into(), b.into())).unzip();
        Self { kb_ids, labels, boolean_answer: None }
    }

    pub fn is_empty(&self) -> bool {
        self.kb_ids.is_empty() && self.boolean_answer.is_none()
    }

    /// Maps a SPARQL 1.1 JSON results document. For SELECT, each row's first
    /// non-label variable gives the answer; a `<var>Label` binding gives its
    /// label, otherwise the id is used. Entity URIs are reduced to Q-ids.
    pub fn from_sparql_json(doc: &Value) -> Result<Self, KbError> {
        if let Some(b) = doc.get("boolean") {
            return b
                .as_bool()
                .map(Self::boolean)
                .ok_or_else(|| KbError::ExecutionFailed("non-boolean ASK result".into()));
        }
        let bad = |what: &str| KbError::ExecutionFailed(format!("malformed SPARQL results: {what}"));
        let vars: Vec<&str> = doc
            .pointer("/head/vars")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing head.vars"))?
            .iter()
            .filter_map(Value::as_str)
            .collect();
        let rows = doc
            .pointer("/results/bindings")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing results.bindings"))?;
        let answer_var = vars.iter().find(|v| !v.ends_with("Label")).copied();

        let mut result = Self::empty();
        for row in rows {
            let Some(var) = answer_var.or_else(|| vars.first().copied()) else { break };
            let Some(value) = row.pointer(&format!("/{var}/value")).and_then(Value::as_str) else { continue };
            let id = match ENTITY_URI.captures(value) {
                Some(c) => c[1].to_string(),
                None => value.to_string(),
            };
            let label = row
                .pointer(&format!("/{var}Label/value"))
                .and_then(Value::as_str)
                .map_or_else(|| id.clone(), String::from);
            if !result.kb_ids.contains(&id) {
                result.kb_ids.push(id);
                result.labels.push(label);
            }
        }
        Ok(result)
    }
}

/// Client for a SPARQL 1.1 endpoint returning JSON results.
#[derive(Debug, Clone)]
pub struct SparqlClient {
    client: reqwest::Client,
    url: String,
}

impl SparqlClient {
    /// `endpoint` is the full query URL (for Wikidata,
    /// `https://query.wikidata.org/sparql`).
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        Self { client: http::client(timeout), url: endpoint.to_string() }
    }

    pub async fn try_execute(&self, query: &str) -> Result<KbResult, KbError> {
        let fail = |e: String| KbError::ExecutionFailed(format!("{}: {e}", self.url));
        let response = self
            .client
            .post(&self.url)
            .header(reqwest::header::ACCEPT, "application/sparql-results+json")
            .form(&[("query", query)])
            .send()
            .await
            .map_err(|e| fail(e.to_string()))?;
        let doc: Value = http::decode(&self.url, response).await.map_err(|e| fail(e.to_string()))?;
        KbResult::from_sparql_json(&doc)
    }

    /// Like [`try_execute`](Self::try_execute) but any failure is an empty result.
    pub async fn execute(&self, query: &str) -> KbResult {
        self.try_execute(query).await.unwrap_or_else(|e| {
            tracing::debug!(error = %e, "SPARQL failed");
            KbResult::empty()
        })
    }
}

/// `Wikidata says the answer to "<question>" is: <answers>.`
pub fn format_kb_evidence(question: &str, result: &KbResult) -> EvidenceItem {
    let answers = match result.boolean_answer {
        Some(true) => "yes".to_string(),
        Some(false) => "no".to_string(),
        None => result.labels.join(", "),
    };
    let mut item = EvidenceItem::new(
        EvidenceKind::Kb,
        format!("Wikidata says the answer to \"{question}\" is: {answers}."),
    );
    item.origin_id = result.kb_ids.first().filter(|id| is_qid(id)).cloned();
    item
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::{EntityMode, LinkedEntity};
    use serde_json::json;

    fn entities() -> EntitySet {
        EntitySet::dedup(
            vec![LinkedEntity { surface: "Bob Dylan".into(), kb_id: "Q392".into(), label: "Bob Dylan".into(), score: 0.9 }],
            EntityMode::LinkerOnly,
        )
    }

    fn parse(q: &str) -> SemanticParse {
        SemanticParse { raw_query: q.into(), mentions_used: vec![] }
    }

    #[test]
    fn substitution() {
        let q = "SELECT ?x WHERE { wd:[[Bob Dylan]] wdt:P412 ?x }";
        assert_eq!(substitute_entities(&parse(q), &entities()).unwrap(), "SELECT ?x WHERE { wd:Q392 wdt:P412 ?x }");
        let plain = "ASK { wd:Q1 wdt:P31 wd:Q5 }";
        assert_eq!(substitute_entities(&parse(plain), &entities()).unwrap(), plain);
        let err = substitute_entities(&parse("SELECT ?x { wd:[[Nirvana]] ?p ?x }"), &entities()).unwrap_err();
        assert_eq!(err, KbError::UnresolvedMention("Nirvana".into()));
        assert!(substitute_entities(&parse("wd:[[bob dylan]]"), &entities()).unwrap().contains("Q392"));
    }

    #[test]
    fn evidence_strings() {
        let q = "What is the voice type of the Bob Dylan?";
        let r = KbResult::from_pairs([("Q6074", "baritone")]);
        assert_eq!(
            format_kb_evidence(q, &r).text,
            "Wikidata says the answer to \"What is the voice type of the Bob Dylan?\" is: baritone."
        );
        assert_eq!(
            format_kb_evidence("Nirvana was founded by who?", &KbResult::empty()).text,
            "Wikidata says the answer to \"Nirvana was founded by who?\" is: ."
        );
        assert!(format_kb_evidence("q", &KbResult::boolean(false)).text.ends_with("is: no."));
        let two = KbResult::from_pairs([("Q1", "a"), ("Q2", "b")]);
        assert!(format_kb_evidence("q", &two).text.ends_with("is: a, b."));
    }

    #[test]
    fn sparql_json_mapping() {
        let select = json!({
            "head": {"vars": ["x", "xLabel"]},
            "results": {"bindings": [
                {"x": {"type": "uri", "value": "http://www.wikidata.org/entity/Q6074"},
                 "xLabel": {"type": "literal", "value": "baritone"}},
                {"x": {"type": "uri", "value": "http://www.wikidata.org/entity/Q99"}}
            ]}
        });
        let r = KbResult::from_sparql_json(&select).unwrap();
        assert_eq!(r.kb_ids, vec!["Q6074", "Q99"]);
        assert_eq!(r.labels, vec!["baritone", "Q99"]);
        assert_eq!(KbResult::from_sparql_json(&json!({"head": {}, "boolean": true})).unwrap(), KbResult::boolean(true));
        assert!(KbResult::from_sparql_json(&json!({"nope": 1})).is_err());
        let empty = json!({"head": {"vars": ["x"]}, "results": {"bindings": []}});
        assert!(KbResult::from_sparql_json(&empty).unwrap().is_empty());
    }

    #[tokio::test]
    async fn unreachable_endpoint_gives_empty_result() {
        let client = SparqlClient::new("http://127.0.0.1:9/sparql", Duration::from_millis(200));
        assert!(client.execute("ASK {}").await.is_empty());
        let parser = SemanticParser::new("http://127.0.0.1:9", Duration::from_millis(200));
        assert!(matches!(parser.parse_query("q", &entities()).await, Err(KbError::ParseUnavailable(_))));
    }
}
