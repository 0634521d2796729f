use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatMessage, Role};

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("slot {{{0}}} has no binding")]
    UnboundSlot(String),
    #[error("template {template}: slot {{{slot}}} appears more than once")]
    DuplicateSlot { template: String, slot: String },
    #[error("no prompt template named {0:?}")]
    UnknownTemplate(String),
    #[error("template file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub user: String,
    pub assistant: String,
}

/// A chat prompt: system message, optional leading user turn, few-shot
/// exchanges, then a user turn with `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    #[serde(default)]
    pub version: u32,
    pub system: String,
    #[serde(default)]
    pub preamble: Option<String>,
    #[serde(default)]
    pub few_shot: Vec<FewShot>,
    pub user_suffix: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    256
}

impl PromptTemplate {
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let template: Self = toml::from_str(text)
            .map_err(|e| TemplateError::File { path: "<inline>".into(), message: e.to_string() })?;
        template.validate()?;
        Ok(template)
    }

    /// Slot names in order of appearance.
    pub fn slots(&self) -> Vec<&str> {
        SLOT.captures_iter(&self.user_suffix)
            .map(|c| c.get(1).expect("slot group").as_str())
            .collect()
    }

    /// Reads slot values back out of a user turn rendered from this
    /// template, or `None` if the text does not fit. Each value ends at the
    /// first occurrence of the literal text that follows its slot.
    pub fn bindings_from(&self, user_turn: &str) -> Option<BTreeMap<String, String>> {
        let mut pattern = String::from("(?s)^");
        let mut last = 0;
        for caps in SLOT.captures_iter(&self.user_suffix) {
            let whole = caps.get(0).expect("whole match");
            pattern.push_str(&regex::escape(&self.user_suffix[last..whole.start()]));
            pattern.push_str("(.*?)");
            last = whole.end();
        }
        pattern.push_str(&regex::escape(&self.user_suffix[last..]));
        pattern.push('$');
        let caps = Regex::new(&pattern).ok()?.captures(user_turn)?;
        Some(self.slots().into_iter().zip(caps.iter().skip(1)).map(|(slot, m)| (slot.to_string(), m.map_or("", |m| m.as_str()).to_string())).collect())
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let mut seen = HashSet::new();
        for slot in self.slots() {
            if !seen.insert(slot) {
                return Err(TemplateError::DuplicateSlot { template: self.name.clone(), slot: slot.into() });
            }
        }
        Ok(())
    }

    /// Substitutes bindings into the user turn. Everything else is emitted
    /// verbatim; bindings without a slot are ignored.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<Vec<ChatMessage>, TemplateError> {
        let mut missing = None;
        let user = SLOT.replace_all(&self.user_suffix, |caps: &regex::Captures| {
            match bindings.get(&caps[1]) {
                Some(value) => value.clone(),
                None => {
                    missing.get_or_insert_with(|| caps[1].to_string());
                    String::new()
                }
            }
        });
        if let Some(slot) = missing {
            return Err(TemplateError::UnboundSlot(slot));
        }

        let mut messages = vec![ChatMessage::new(Role::System, &self.system)];
        if let Some(preamble) = &self.preamble {
            messages.push(ChatMessage::new(Role::User, preamble));
        }
        for shot in &self.few_shot {
            messages.push(ChatMessage::new(Role::User, &shot.user));
            messages.push(ChatMessage::new(Role::Assistant, &shot.assistant));
        }
        messages.push(ChatMessage::new(Role::User, user.into_owned()));
        Ok(messages)
    }
}

/// Flattens rendered messages into one prompt string, as seen by the mock
/// backend's substring matchers.
pub fn render_text(messages: &[ChatMessage]) -> String {
    messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n\n")
}

/// Renders a template straight to text.
pub fn render(template: &PromptTemplate, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    template.render(bindings).map(|m| render_text(&m))
}

const BUILTIN: &[(&str, &str)] = &[
    ("entity_detection", include_str!("../../prompts/entity_detection.toml")),
    ("draft_answer", include_str!("../../prompts/draft_answer.toml")),
    ("split_claims", include_str!("../../prompts/split_claims.toml")),
    ("verify_claim", include_str!("../../prompts/verify_claim.toml")),
    ("summarize_text", include_str!("../../prompts/summarize_text.toml")),
    ("summarize_table", include_str!("../../prompts/summarize_table.toml")),
    ("fuse_answer", include_str!("../../prompts/fuse_answer.toml")),
    ("judge_match", include_str!("../../prompts/judge_match.toml")),
];

/// Named templates for every pipeline stage.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: HashMap<String, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    /// The templates shipped in `prompts/`.
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, text)| {
                let t = PromptTemplate::from_toml(text).expect("built-in prompt parses");
                debug_assert_eq!(&t.name, name);
                (t.name.clone(), t)
            })
            .collect();
        Self { templates }
    }

    /// Built-ins overridden by any `*.toml` template found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        let file_err = |path: &Path, message: String| TemplateError::File { path: path.display().to_string(), message };
        let entries = std::fs::read_dir(dir).map_err(|e| file_err(dir, e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| file_err(dir, e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("toml") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| file_err(&path, e.to_string()))?;
            let template: PromptTemplate = toml::from_str(&text).map_err(|e| file_err(&path, e.to_string()))?;
            template.validate()?;
            set.insert(template);
        }
        Ok(set)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.name.clone(), template);
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates.get(name).ok_or_else(|| TemplateError::UnknownTemplate(name.into()))
    }

    /// The template whose system prompt opens `messages`. Lets a chat server
    /// that only sees messages tell the stages apart.
    pub fn identify(&self, messages: &[ChatMessage]) -> Option<&PromptTemplate> {
        let system = messages.first().filter(|m| m.role == Role::System)?;
        let mut found = self.templates.values().filter(|t| t.system == system.content);
        let template = found.next()?;
        found.next().is_none().then_some(template)
    }
}
