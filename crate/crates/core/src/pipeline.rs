//! Per-question orchestration: the KB path, retrieval with summarization and
//! the draft-and-verify path run concurrently, then the pool is fused.

use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use crate::config::{BackendKind, ConfigError, PipelineConfig, Source};
use crate::entity::{resolve_entities, EntityLinker, EntityMode, LinkedEntity};
use crate::fusion::{assemble, final_answer, summarize_hits, EvidenceItem, FinalAnswer, Prediction};
use crate::grounding::{draft_answer, grounded_claims, split_claims};
use crate::index::{Hit, Index, PassageKind, RemoteRetriever, Retriever};
use crate::kb::{format_kb_evidence, substitute_entities, KbResult, SemanticParser, SparqlClient};
use crate::llm::{Llm, MockBackend, PromptSet, RemoteChat, RetryPolicy};

/// What failed while answering one question. Failures never abort the
/// question; they only thin out the evidence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub evidence_failures: usize,
    pub messages: Vec<String>,
}

impl Diagnostics {
    fn fail(&mut self, message: impl Into<String>) {
        self.evidence_failures += 1;
        self.messages.push(message.into());
    }
}

#[derive(Debug, Clone)]
pub struct Answered {
    pub answer: FinalAnswer,
    pub diagnostics: Diagnostics,
}

impl Answered {
    pub fn prediction(&self, gold: Option<String>) -> Prediction {
        Prediction::new(&self.answer, gold)
    }
}

#[derive(Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    llm: Llm,
    text: Option<Arc<dyn Retriever>>,
    tables: Option<Arc<dyn Retriever>>,
    linker: Option<EntityLinker>,
    parser: Option<SemanticParser>,
    sparql: Option<SparqlClient>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("config", &self.config).finish_non_exhaustive()
    }
}

fn load_index(path: &std::path::Path) -> Result<Arc<dyn Retriever>, ConfigError> {
    let index = Index::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(Arc::new(index))
}

impl Pipeline {
    /// Builds clients for every configured service. Missing endpoints leave
    /// their path without evidence.
    pub fn from_config(config: &PipelineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let timeout = config.timeout();
        let prompts = match &config.prompts_dir {
            Some(dir) => PromptSet::with_overrides(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => PromptSet::builtin(),
        };
        let llm = match config.backend {
            BackendKind::Mock => {
                let mut mock = MockBackend::new().heuristics(config.mock_heuristics);
                if let Some(rules) = &config.mock_rules {
                    mock = mock.load_rules(rules).map_err(ConfigError::Invalid)?;
                }
                Llm::new(Arc::new(mock), prompts)
            }
            BackendKind::Remote => {
                let endpoint = config.endpoints.llm.as_deref().expect("validated");
                let mut chat = RemoteChat::new(endpoint, &config.model, timeout)
                    .with_retry(RetryPolicy {
                        attempts: config.retry_attempts,
                        base_delay: Duration::from_millis(config.retry_base_ms),
                    })
                    .with_max_in_flight(config.llm_max_in_flight);
                if let Ok(key) = std::env::var(crate::llm::remote::KEY_ENV) {
                    if !key.is_empty() {
                        chat = chat.with_key(key);
                    }
                }
                Llm::new(Arc::new(chat), prompts)
            }
        };
        let remote = |collection: &str, kind| -> Option<Arc<dyn Retriever>> {
            let endpoint = config.endpoints.retriever.as_deref()?;
            Some(Arc::new(RemoteRetriever::new(endpoint, collection, kind, timeout)))
        };
        let text = match &config.text_index {
            Some(path) => Some(load_index(path)?),
            None => remote(&config.text_collection, PassageKind::Text),
        };
        let tables = match &config.table_index {
            Some(path) => Some(load_index(path)?),
            None => remote(&config.table_collection, PassageKind::Table),
        };
        Ok(Self {
            config: config.clone(),
            llm,
            text,
            tables,
            linker: config.endpoints.linker.as_deref().map(|e| EntityLinker::new(e, timeout)),
            parser: config.endpoints.parser.as_deref().map(|e| SemanticParser::new(e, timeout)),
            sparql: config.endpoints.sparql.as_deref().map(|e| SparqlClient::new(e, timeout)),
        })
    }

    /// A pipeline over explicit parts; services not given stay disabled.
    pub fn new(config: PipelineConfig, llm: Llm) -> Self {
        Self { config, llm, text: None, tables: None, linker: None, parser: None, sparql: None }
    }

    pub fn with_text_retriever(mut self, r: Arc<dyn Retriever>) -> Self {
        self.text = Some(r);
        self
    }

    pub fn with_table_retriever(mut self, r: Arc<dyn Retriever>) -> Self {
        self.tables = Some(r);
        self
    }

    pub fn with_kb(mut self, linker: Option<EntityLinker>, parser: Option<SemanticParser>, sparql: Option<SparqlClient>) -> Self {
        self.linker = linker;
        self.parser = parser;
        self.sparql = sparql;
        self
    }

    /// Same services, different enabled sources.
    pub fn with_sources(&self, sources: impl IntoIterator<Item = Source>) -> Self {
        Self { config: self.config.with_sources(sources), ..self.clone() }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn llm(&self) -> &Llm {
        &self.llm
    }

    pub async fn answer(&self, question: &str) -> Answered {
        self.answer_with(question, None).await
    }

    /// `oracle` supplies gold entities for [`EntityMode::Oracle`].
    pub async fn answer_with(&self, question: &str, oracle: Option<&[LinkedEntity]>) -> Answered {
        let question = question.trim();
        let mut diag = Diagnostics::default();
        let wants_retrieval = self.config.enabled(Source::Text)
            || self.config.enabled(Source::Tables)
            || self.config.enabled(Source::LlmClaim);

        let kb_path = async {
            if !self.config.enabled(Source::Kb) {
                return (None, Vec::new());
            }
            let (item, notes) = self.kb_evidence(question, oracle).await;
            (Some(item), notes)
        };

        let retrieval_path = async {
            let retrieve = async {
                if !wants_retrieval {
                    return (Vec::new(), Vec::new(), Vec::new());
                }
                let (text, tables) = tokio::join!(
                    self.retrieve(self.text.as_deref(), question, Source::Text),
                    self.retrieve(self.tables.as_deref(), question, Source::Tables),
                );
                let mut notes = Vec::new();
                let mut take = |r: Result<Vec<Hit>, String>| r.unwrap_or_else(|e| {
                    notes.push(e);
                    Vec::new()
                });
                (take(text), take(tables), notes)
            };
            let draft = async {
                if !self.config.enabled(Source::LlmClaim) {
                    return (Vec::new(), None);
                }
                match draft_answer(question, &self.llm).await {
                    Ok(draft) => (split_claims(&draft, &self.llm).await, None),
                    Err(e) => (Vec::new(), Some(format!("draft: {e}"))),
                }
            };
            let ((text_hits, table_hits, mut notes), (claims, draft_note)) = tokio::join!(retrieve, draft);
            notes.extend(draft_note);

            let verify_hits: Vec<Hit> = text_hits.iter().chain(&table_hits).cloned().collect();
            let (text_ev, table_ev, claim_ev) = tokio::join!(
                async {
                    if self.config.enabled(Source::Text) {
                        summarize_hits(question, &text_hits, &self.llm).await
                    } else {
                        Vec::new()
                    }
                },
                async {
                    if self.config.enabled(Source::Tables) {
                        summarize_hits(question, &table_hits, &self.llm).await
                    } else {
                        Vec::new()
                    }
                },
                grounded_claims(&claims, &verify_hits, &self.llm),
            );
            (text_ev, table_ev, claim_ev, notes)
        };

        let ((kb_item, kb_notes), (text_ev, table_ev, claim_ev, notes)) = tokio::join!(kb_path, retrieval_path);
        for note in kb_notes.into_iter().chain(notes) {
            diag.fail(note);
        }
        let pool = assemble(question, kb_item, text_ev, table_ev, claim_ev);
        let answer = final_answer(question, pool, &self.llm).await;
        Answered { answer, diagnostics: diag }
    }

    async fn retrieve(&self, retriever: Option<&dyn Retriever>, question: &str, source: Source) -> Result<Vec<Hit>, String> {
        let Some(retriever) = retriever else {
            return if self.config.enabled(source) {
                Err(format!("{}: no retriever configured", source.as_str()))
            } else {
                Ok(Vec::new())
            };
        };
        retriever
            .retrieve(question, self.config.k_for(source))
            .await
            .map_err(|e| format!("{}: {e}", source.as_str()))
    }

    /// The KB statement for `question`; every failure yields the empty-answer
    /// statement plus a note.
    async fn kb_evidence(&self, question: &str, oracle: Option<&[LinkedEntity]>) -> (EvidenceItem, Vec<String>) {
        let mut notes = Vec::new();
        let mode = self.config.entity_mode;
        let (entities, errors) = resolve_entities(question, mode, &self.llm, self.linker.as_ref(), oracle).await;
        notes.extend(errors.into_iter().map(|e| format!("kb: {e}")));
        if mode == EntityMode::Oracle && oracle.is_none() {
            notes.push("kb: oracle mode without dataset entities".into());
        }

        let result = async {
            let parser = self.parser.as_ref().ok_or("kb: no semantic parser configured")?;
            let sparql = self.sparql.as_ref().ok_or("kb: no SPARQL endpoint configured")?;
            let parse = parser.parse_query(question, &entities).await.map_err(|e| format!("kb: {e}"))?;
            let query = substitute_entities(&parse, &entities).map_err(|e| format!("kb: {e}"))?;
            sparql.try_execute(&query).await.map_err(|e| format!("kb: {e}"))
        }
        .await;
        let result = result.unwrap_or_else(|e: String| {
            notes.push(e);
            KbResult::empty()
        });
        (format_kb_evidence(question, &result), notes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{EvidenceKind, NO_ANSWER};
    use crate::index::Passage;

    fn index() -> Arc<dyn Retriever> {
        let p = |id: &str, text: &str, kind| Passage { doc_id: id.into(), title: String::new(), text: text.into(), kind };
        Arc::new(
            Index::build(vec![
                p("t1", "Nirvana was founded by Kurt Cobain and Krist Novoselic in 1987.", PassageKind::Text),
                p("t2", "Grunge emerged in Seattle.", PassageKind::Text),
            ])
            .unwrap(),
        )
    }

    #[tokio::test]
    async fn text_only_pipeline_answers_from_text() {
        let llm = Llm::mock(MockBackend::with_heuristics());
        let config = PipelineConfig::default().with_sources([Source::Text]);
        let pipeline = Pipeline::new(config, llm).with_text_retriever(index());
        let out = pipeline.answer("Nirvana was founded by who?").await;
        assert_eq!(out.answer.pool.len(), 1);
        assert_eq!(out.answer.pool.items[0].kind, EvidenceKind::Text);
        assert_eq!(out.answer.text, "Nirvana was founded by Kurt Cobain and Krist Novoselic in 1987");
        assert_eq!(out.diagnostics.evidence_failures, 0);
    }

    #[tokio::test]
    async fn kb_failures_still_give_kb_evidence_and_sentinel() {
        let llm = Llm::mock(MockBackend::with_heuristics());
        let config = PipelineConfig::default().with_sources([Source::Kb]);
        let out = Pipeline::new(config, llm).answer("Nirvana was founded by who?").await;
        assert_eq!(out.answer.text, NO_ANSWER);
        assert_eq!(out.answer.pool.items[0].text, "Wikidata says the answer to \"Nirvana was founded by who?\" is: .");
        assert!(out.diagnostics.evidence_failures > 0);
    }

    #[tokio::test]
    async fn verified_claims_join_the_pool() {
        let llm = Llm::mock(
            MockBackend::with_heuristics()
                .rule(Some(crate::llm::stage::DRAFT_ANSWER), "", "Nirvana was founded by Kurt Cobain. Nirvana is from Mars."),
        );
        let config = PipelineConfig::default().with_sources([Source::LlmClaim]);
        let out = Pipeline::new(config, llm).with_text_retriever(index()).answer("Nirvana was founded by who?").await;
        let claims: Vec<&str> = out.answer.pool.of_kind(EvidenceKind::LlmClaim).map(|i| i.text.as_str()).collect();
        assert_eq!(claims, vec!["Nirvana was founded by Kurt Cobain."]);
        assert_eq!(out.answer.pool.of_kind(EvidenceKind::Text).count(), 0);
    }
}
