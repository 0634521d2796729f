//! Pipeline configuration: a JSON file plus `HETQA_*` environment overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::entity::EntityMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Text,
    Tables,
    Kb,
    LlmClaim,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Text, Source::Tables, Source::Kb, Source::LlmClaim];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Tables => "tables",
            Self::Kb => "kb",
            Self::LlmClaim => "llm_claim",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "text" => Ok(Self::Text),
            "tables" | "table" => Ok(Self::Tables),
            "kb" => Ok(Self::Kb),
            "llm_claim" | "llm" | "claims" => Ok(Self::LlmClaim),
            other => Err(ConfigError::Invalid(format!("unknown source {other:?}"))),
        }
    }
}

/// Parses `text,tables,kb` style lists.
pub fn parse_sources(list: &str) -> Result<BTreeSet<Source>, ConfigError> {
    list.split([',', '+']).filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// `text+tables+kb` style label for a source set.
pub fn sources_label(sources: &BTreeSet<Source>) -> String {
    Source::ALL
        .iter()
        .filter(|s| sources.contains(s))
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Self::Mock),
            "remote" => Ok(Self::Remote),
            other => Err(ConfigError::Invalid(format!("unknown backend {other:?}"))),
        }
    }
}

/// Service base URLs. The SPARQL entry is the full query URL.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub retriever: Option<String>,
    pub linker: Option<String>,
    pub parser: Option<String>,
    pub sparql: Option<String>,
    pub llm: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sources: BTreeSet<Source>,
    /// Hits per retrieval source unless overridden in `k_per_source`.
    pub k: usize,
    pub k_per_source: BTreeMap<Source, usize>,
    pub endpoints: Endpoints,
    pub backend: BackendKind,
    pub seed: u64,
    pub entity_mode: EntityMode,
    /// Local BM25 index files; each replaces the remote retriever for its source.
    pub text_index: Option<PathBuf>,
    pub table_index: Option<PathBuf>,
    /// Remote retriever collection names.
    pub text_collection: String,
    pub table_collection: String,
    /// JSON rule table for the mock backend.
    pub mock_rules: Option<PathBuf>,
    /// Whether unmatched mock requests use the built-in stage heuristics.
    pub mock_heuristics: bool,
    pub prompts_dir: Option<PathBuf>,
    pub model: String,
    pub timeout_secs: f64,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    pub llm_max_in_flight: usize,
    pub service_max_in_flight: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sources: Source::ALL.into_iter().collect(),
            k: 5,
            k_per_source: BTreeMap::new(),
            endpoints: Endpoints::default(),
            backend: BackendKind::Mock,
            seed: 0,
            entity_mode: EntityMode::LlmEnriched,
            text_index: None,
            table_index: None,
            text_collection: "text".into(),
            table_collection: "tables".into(),
            mock_rules: None,
            mock_heuristics: true,
            prompts_dir: None,
            model: "gpt-4".into(),
            timeout_secs: 15.0,
            retry_attempts: 3,
            retry_base_ms: 1000,
            llm_max_in_flight: 8,
            service_max_in_flight: 16,
        }
    }
}

type EndpointField = fn(&mut Endpoints) -> &mut Option<String>;

const ENV_OVERRIDES: &[(&str, EndpointField)] = &[
    ("HETQA_RETRIEVER_ENDPOINT", |e| &mut e.retriever),
    ("HETQA_LINKER_ENDPOINT", |e| &mut e.linker),
    ("HETQA_PARSER_ENDPOINT", |e| &mut e.parser),
    ("HETQA_SPARQL_ENDPOINT", |e| &mut e.sparql),
    ("HETQA_LLM_ENDPOINT", |e| &mut e.llm),
];

impl PipelineConfig {
    /// Reads a JSON config. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file_err = |message: String| ConfigError::File { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.text_index, &mut self.table_index, &mut self.mock_rules, &mut self.prompts_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Applies `HETQA_{RETRIEVER,LINKER,PARSER,SPARQL,LLM}_ENDPOINT`.
    pub fn apply_env(&mut self) {
        self.apply_overrides(|name| std::env::var(name).ok());
    }

    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (name, field) in ENV_OVERRIDES {
            if let Some(value) = lookup(name).filter(|v| !v.is_empty()) {
                *field(&mut self.endpoints) = Some(value);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sources.is_empty() {
            return Err(ConfigError::Invalid("at least one source must be enabled".into()));
        }
        if self.k == 0 || self.k_per_source.values().any(|&k| k == 0) {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("timeout_secs must be positive".into()));
        }
        if self.backend == BackendKind::Remote && self.endpoints.llm.is_none() {
            return Err(ConfigError::Invalid("remote backend needs an LLM endpoint (HETQA_LLM_ENDPOINT)".into()));
        }
        Ok(())
    }

    pub fn k_for(&self, source: Source) -> usize {
        self.k_per_source.get(&source).copied().unwrap_or(self.k)
    }

    pub fn enabled(&self, source: Source) -> bool {
        self.sources.contains(&source)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn with_sources(&self, sources: impl IntoIterator<Item = Source>) -> Self {
        Self { sources: sources.into_iter().collect(), ..self.clone() }
    }
}
