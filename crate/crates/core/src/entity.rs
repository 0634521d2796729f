//! Entity mention detection and linking to Wikidata ids.

use std::collections::HashMap;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::http::{self, CallError};
use crate::llm::{stage, Llm};

/// Longest description kept for a mention, in words.
pub const MAX_DESCRIPTION_WORDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub description: String,
}

impl Mention {
    /// Trims both fields and cuts the description to ten words.
    pub fn new(surface: &str, description: &str) -> Option<Self> {
        let surface = surface.trim();
        if surface.is_empty() {
            return None;
        }
        let description = description
            .split_whitespace()
            .take(MAX_DESCRIPTION_WORDS)
            .collect::<Vec<_>>()
            .join(" ");
        Some(Self { surface: surface.into(), description })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedEntity {
    pub surface: String,
    pub kb_id: String,
    pub label: String,
    pub score: f64,
}

impl LinkedEntity {
    pub fn validate(&self) -> Result<(), EntityError> {
        if !is_qid(&self.kb_id) {
            return Err(EntityError::InvalidEntity(format!("kb_id {:?} is not a Q-id", self.kb_id)));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(EntityError::InvalidEntity(format!("score {} of {} outside [0,1]", self.score, self.kb_id)));
        }
        Ok(())
    }
}

/// `Q` followed by one or more digits.
pub fn is_qid(id: &str) -> bool {
    id.len() > 1 && id.starts_with('Q') && id[1..].bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityMode {
    LinkerOnly,
    #[default]
    LlmEnriched,
    Oracle,
}

impl std::str::FromStr for EntityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linker_only" => Ok(Self::LinkerOnly),
            "llm_enriched" => Ok(Self::LlmEnriched),
            "oracle" => Ok(Self::Oracle),
            other => Err(format!("unknown entity mode {other:?}")),
        }
    }
}

/// Linked entities, at most one per `kb_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySet {
    pub entities: Vec<LinkedEntity>,
    pub mode: EntityMode,
}

impl EntitySet {
    pub fn empty(mode: EntityMode) -> Self {
        Self { entities: Vec::new(), mode }
    }

    /// Keeps the highest-scoring entity per `kb_id`, at the position of its
    /// first occurrence.
    pub fn dedup(entities: Vec<LinkedEntity>, mode: EntityMode) -> Self {
        let mut out: Vec<LinkedEntity> = Vec::new();
        let mut at: HashMap<String, usize> = HashMap::new();
        for e in entities {
            match at.get(&e.kb_id) {
                Some(&i) => {
                    if e.score > out[i].score {
                        out[i] = e;
                    }
                }
                None => {
                    at.insert(e.kb_id.clone(), out.len());
                    out.push(e);
                }
            }
        }
        Self { entities: out, mode }
    }

    /// The dataset-provided entities, as is.
    pub fn oracle(entities: &[LinkedEntity]) -> Self {
        Self::dedup(entities.to_vec(), EntityMode::Oracle)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, kb_id: &str) -> Option<&LinkedEntity> {
        self.entities.iter().find(|e| e.kb_id == kb_id)
    }
}

/// Union by `kb_id`; where both sets hold the same id the enriched entry is
/// kept. Base order comes first, then entities new in `enriched`.
pub fn merge(base: &EntitySet, enriched: &EntitySet) -> EntitySet {
    let mut entities: Vec<LinkedEntity> = base
        .entities
        .iter()
        .map(|b| enriched.get(&b.kb_id).unwrap_or(b).clone())
        .collect();
    for e in &enriched.entities {
        if base.get(&e.kb_id).is_none() {
            entities.push(e.clone());
        }
    }
    EntitySet { entities, mode: EntityMode::LlmEnriched }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EntityError {
    #[error("entity detection unavailable: {0}")]
    EntityDetectionUnavailable(String),
    #[error("entity linker unavailable: {0}")]
    LinkerUnavailable(String),
    #[error("invalid linked entity: {0}")]
    InvalidEntity(String),
}

static MENTION_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+\s*[.)]\s*(.+)$").unwrap());

/// Parses `N. <surface> is <description>` lines, splitting at the first
/// " is ". Other lines are ignored.
pub fn parse_mentions(reply: &str) -> Vec<Mention> {
    reply
        .lines()
        .filter_map(|line| MENTION_LINE.captures(line))
        .filter_map(|caps| {
            let body = caps.get(1)?.as_str();
            let (surface, description) = body.split_once(" is ")?;
            Mention::new(surface, description)
        })
        .collect()
}

/// Asks the model for the entities in `query` with short descriptions.
pub async fn detect_mentions(query: &str, llm: &Llm) -> Result<Vec<Mention>, EntityError> {
    if query.trim().is_empty() {
        return Ok(Vec::new());
    }
    let reply = llm
        .ask(stage::ENTITY_DETECTION, [("question", query)])
        .await
        .map_err(|e| EntityError::EntityDetectionUnavailable(e.to_string()))?;
    Ok(parse_mentions(&reply))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkHint {
    pub surface: String,
    pub description: String,
}

/// `POST /link` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRequest {
    pub text: String,
    #[serde(default)]
    pub hints: Vec<LinkHint>,
}

/// `POST /link` response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResponse {
    pub entities: Vec<LinkedEntity>,
}

/// The query followed by one `; <surface> is <description>` clause per mention.
pub fn hinted_text(query: &str, mentions: &[Mention]) -> String {
    let mut text = query.to_string();
    for m in mentions {
        text.push_str("; ");
        text.push_str(&m.surface);
        text.push_str(" is ");
        text.push_str(&m.description);
    }
    text
}

/// Client for an entity linker speaking the `/link` protocol.
#[derive(Debug, Clone)]
pub struct EntityLinker {
    client: reqwest::Client,
    url: String,
}

impl EntityLinker {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        Self { client: http::client(timeout), url: http::join_url(endpoint, "link") }
    }

    /// Links `query`, passing `mentions` as hints. An empty query gives an
    /// empty set without a request.
    pub async fn link(&self, query: &str, mentions: &[Mention], mode: EntityMode) -> Result<EntitySet, EntityError> {
        if query.trim().is_empty() {
            return Ok(EntitySet::empty(mode));
        }
        let request = LinkRequest {
            text: hinted_text(query, mentions),
            hints: mentions
                .iter()
                .map(|m| LinkHint { surface: m.surface.clone(), description: m.description.clone() })
                .collect(),
        };
        let response: LinkResponse = http::post_json(&self.client, &self.url, &request)
            .await
            .map_err(|e| match e {
                CallError::Unavailable(m) | CallError::Protocol(m) => EntityError::LinkerUnavailable(m),
            })?;
        for e in &response.entities {
            e.validate()?;
        }
        Ok(EntitySet::dedup(response.entities, mode))
    }
}

/// Entities for `query` in the requested mode, falling back from enriched
/// to linker-only to empty. The second value lists what went wrong on the way.
pub async fn resolve_entities(
    query: &str,
    mode: EntityMode,
    llm: &Llm,
    linker: Option<&EntityLinker>,
    oracle: Option<&[LinkedEntity]>,
) -> (EntitySet, Vec<EntityError>) {
    let mut errors = Vec::new();
    if mode == EntityMode::Oracle {
        return (EntitySet::oracle(oracle.unwrap_or_default()), errors);
    }
    let Some(linker) = linker else {
        errors.push(EntityError::LinkerUnavailable("no linker endpoint configured".into()));
        return (EntitySet::empty(mode), errors);
    };
    let base = match linker.link(query, &[], EntityMode::LinkerOnly).await {
        Ok(set) => set,
        Err(e) => {
            errors.push(e);
            return (EntitySet::empty(mode), errors);
        }
    };
    if mode == EntityMode::LinkerOnly {
        return (base, errors);
    }
    let mentions = match detect_mentions(query, llm).await {
        Ok(m) if !m.is_empty() => m,
        Ok(_) => return (base, errors),
        Err(e) => {
            errors.push(e);
            return (base, errors);
        }
    };
    match linker.link(query, &mentions, EntityMode::LlmEnriched).await {
        Ok(enriched) => (merge(&base, &enriched), errors),
        Err(e) => {
            errors.push(e);
            (base, errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(kb_id: &str, surface: &str, score: f64) -> LinkedEntity {
        LinkedEntity { surface: surface.into(), kb_id: kb_id.into(), label: surface.into(), score }
    }

    fn set(entities: Vec<LinkedEntity>) -> EntitySet {
        EntitySet::dedup(entities, EntityMode::LinkerOnly)
    }

    #[test]
    fn parses_numbered_mentions() {
        let reply = "1. LeBron James is American basketball player (born 1984)\n2. National Basketball Association is North American professional sports league ";
        let mentions = parse_mentions(reply);
        assert_eq!(mentions.len(), 2);
        assert_eq!(mentions[0].surface, "LeBron James");
        assert_eq!(mentions[0].description, "American basketball player (born 1984)");
        assert_eq!(mentions[1].description, "North American professional sports league");
    }

    #[test]
    fn malformed_lines_are_dropped_and_descriptions_cut() {
        let reply = "1. Sparta is city-state in ancient Greece\nSparta without number\n2. no verb here";
        assert_eq!(parse_mentions(reply), vec![Mention::new("Sparta", "city-state in ancient Greece").unwrap()]);
        let long = parse_mentions("1. X is a b c d e f g h i j k l m");
        assert_eq!(long[0].description.split_whitespace().count(), MAX_DESCRIPTION_WORDS);
        assert!(parse_mentions("1.  is empty surface").is_empty());
    }

    #[test]
    fn hints_are_appended_as_clauses() {
        let m = [Mention::new("Academy Award", "annual awards for cinematic achievements").unwrap()];
        assert_eq!(
            hinted_text("Who won the Oscars for the best actress in 1952?", &m),
            "Who won the Oscars for the best actress in 1952?; Academy Award is annual awards for cinematic achievements"
        );
    }

    #[test]
    fn dedup_keeps_higher_score() {
        let s = set(vec![ent("Q1", "a", 0.3), ent("Q2", "b", 0.5), ent("Q1", "A", 0.8)]);
        assert_eq!(s.entities, vec![ent("Q1", "A", 0.8), ent("Q2", "b", 0.5)]);
    }

    #[test]
    fn merge_rules() {
        let s = set(vec![ent("Q1", "a", 0.4)]);
        assert_eq!(merge(&s, &EntitySet::empty(EntityMode::LlmEnriched)).entities, s.entities);
        let two = set(vec![ent("Q2", "b", 0.1), ent("Q3", "c", 0.2)]);
        assert_eq!(merge(&s, &two).len(), 3);
        let enriched = set(vec![ent("Q1", "A!", 0.9)]);
        let merged = merge(&s, &enriched);
        assert_eq!(merged.entities, vec![ent("Q1", "A!", 0.9)]);
        assert_eq!(merged.mode, EntityMode::LlmEnriched);
        assert_eq!(merge(&s, &s).entities, s.entities);
    }

    #[test]
    fn qid_pattern() {
        assert!(is_qid("Q392"));
        assert!(!is_qid("Q"));
        assert!(!is_qid("P31"));
        assert!(!is_qid("Q3a"));
        assert!(ent("Q1", "a", 1.5).validate().is_err());
    }

    #[tokio::test]
    async fn oracle_mode_skips_detection_and_linking() {
        let backend = std::sync::Arc::new(crate::llm::MockBackend::new());
        let llm = Llm::new(backend.clone(), crate::llm::PromptSet::builtin());
        let gold = [ent("Q392", "Bob Dylan", 1.0)];
        let (set, errors) = resolve_entities("q", EntityMode::Oracle, &llm, None, Some(&gold)).await;
        assert_eq!(set.entities, gold.to_vec());
        assert_eq!(set.mode, EntityMode::Oracle);
        assert!(errors.is_empty());
        assert!(backend.calls().is_empty());
    }

    #[tokio::test]
    async fn unreachable_linker_gives_empty_set() {
        let llm = Llm::mock(crate::llm::MockBackend::new());
        let linker = EntityLinker::new("http://127.0.0.1:9", Duration::from_millis(200));
        let (set, errors) = resolve_entities("Who founded Nirvana?", EntityMode::LlmEnriched, &llm, Some(&linker), None).await;
        assert!(set.is_empty());
        assert!(matches!(errors[0], EntityError::LinkerUnavailable(_)));
    }
}
