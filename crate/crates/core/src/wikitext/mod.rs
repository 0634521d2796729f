//! Wikitext page parsing, table/infobox extraction and linearization.
//!
//! [`parse_page`] splits a page into sections holding prose sentences,
//! span-expanded tables and infoboxes. [`linearize_page`] turns those into
//! retrieval-ready [`LinearizedRecord`]s.

pub mod dump;
mod extract;
mod linearize;
pub mod markup;
mod sentences;
mod table;

use std::collections::HashSet;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use linearize::{
    attach_context, linearize_infobox, linearize_page, linearize_table, Context,
    LinearizedRecord, RecordKind,
};
pub use dump::{read_pages, PageSource};
pub use extract::{extract, text_passages, ExtractSummary, Extraction, SENTENCES_PER_PASSAGE};
pub use sentences::split_sentences;
pub use table::{expand_spans, Expanded, RawCell, RawTable, MAX_COLSPAN, MAX_ROWSPAN};

use markup::{blank_comments_and_refs, clean_inline, find_balanced, split_top_level, CleanMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WikiPage {
    pub title: String,
    pub page_id: u64,
    pub sections: Vec<Section>,
    pub diagnostics: ParseDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    /// Headings from the outermost level down; empty for the lead.
    pub heading_path: Vec<String>,
    pub sentences: Vec<String>,
    pub tables: Vec<RawTable>,
    pub infoboxes: Vec<Infobox>,
}

impl Section {
    /// The innermost heading, or `""` for the lead section.
    pub fn title(&self) -> &str {
        self.heading_path.last().map_or("", String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infobox {
    pub template_name: String,
    /// Key/value pairs in source order; duplicate keys are kept.
    pub pairs: Vec<(String, String)>,
    pub source_span: Range<usize>,
    pub position: usize,
}

/// Counters for markup the parser had to skip or repair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub malformed: usize,
    pub clipped_spans: usize,
}

static HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(={1,6})(.+?)(={1,6})\s*$").unwrap());

const INFOBOX_NAMES: &[&str] = &["taxobox", "automatic taxobox", "speciesbox"];

/// Parses one page. Never fails: markup that cannot be parsed is skipped and
/// counted in [`WikiPage::diagnostics`].
pub fn parse_page(wikitext: &str, title: &str, page_id: u64) -> WikiPage {
    let (text, malformed) = blank_comments_and_refs(wikitext);
    let mut builder = PageBuilder::default();
    builder.diagnostics.malformed += malformed;

    let mut pos = 0;
    while pos < text.len() {
        let line_end = text[pos..].find('\n').map_or(text.len(), |e| pos + e);
        let line = &text[pos..line_end];
        let trimmed = line.trim_start();
        let start = pos + (line.len() - trimmed.len());
        let next_line = (line_end + 1).min(text.len());

        if let Some((level, heading)) = parse_heading(line) {
            builder.flush_paragraph();
            builder.start_section(level, heading);
            pos = next_line;
        } else if trimmed.starts_with("{|") {
            builder.flush_paragraph();
            let end = table_end(&text, start);
            builder.add_table(&text[start..end], start..end);
            pos = end;
        } else if trimmed.starts_with("{{") {
            match find_balanced(&text, start, "{{", "}}") {
                Some(end) => {
                    let inner = &text[start + 2..end - 2];
                    let name = template_name(inner);
                    let rest_of_line = text[end..].split('\n').next().unwrap_or("");
                    if is_infobox(&name) {
                        builder.flush_paragraph();
                        builder.add_infobox(inner, start..end);
                        pos = end;
                    } else if rest_of_line.trim().is_empty() {
                        // A standalone template block (navbox, hatnote, ...).
                        pos = end;
                    } else {
                        builder.push_prose(line);
                        pos = next_line;
                    }
                }
                None => {
                    builder.diagnostics.malformed += 1;
                    builder.push_prose(line);
                    pos = next_line;
                }
            }
        } else if trimmed.is_empty() || trimmed.starts_with("----") {
            builder.flush_paragraph();
            pos = next_line;
        } else if let Some(item) = strip_list_marker(trimmed) {
            builder.flush_paragraph();
            builder.push_prose(item);
            builder.flush_paragraph();
            pos = next_line;
        } else {
            builder.push_prose(line);
            pos = next_line;
        }
    }
    builder.finish(title, page_id)
}

fn parse_heading(line: &str) -> Option<(usize, String)> {
    let caps = HEADING.captures(line.trim_end())?;
    let level = caps[1].len().min(caps[3].len());
    let title = clean_inline(caps[2].trim(), CleanMode::Prose).trim().to_string();
    (!title.is_empty()).then_some((level, title))
}

/// Byte offset just past the `|}` line closing the table opened at `start`,
/// or the end of text for an unterminated table.
fn table_end(text: &str, start: usize) -> usize {
    let mut depth = 0usize;
    let mut pos = start;
    while pos < text.len() {
        let line_end = text[pos..].find('\n').map_or(text.len(), |e| pos + e);
        let line = text[pos..line_end].trim_start();
        if line.starts_with("{|") {
            depth += 1;
        } else if line.starts_with("|}") {
            depth -= 1;
            if depth == 0 {
                return line_end;
            }
        }
        pos = line_end + 1;
    }
    text.len()
}

fn template_name(inner: &str) -> String {
    split_top_level(inner, "|")[0].trim().replace('_', " ").to_lowercase()
}

fn is_infobox(name: &str) -> bool {
    name.starts_with("infobox") || INFOBOX_NAMES.contains(&name)
}

fn strip_list_marker(line: &str) -> Option<&str> {
    let rest = line.trim_start_matches(['*', '#', ':', ';']);
    (rest.len() != line.len()).then(|| rest.trim_start())
}

#[derive(Default)]
struct PageBuilder {
    sections: Vec<Section>,
    current: Section,
    heading_stack: Vec<(usize, String)>,
    seen_paths: HashSet<Vec<String>>,
    paragraph: String,
    diagnostics: ParseDiagnostics,
}

impl PageBuilder {
    fn push_prose(&mut self, line: &str) {
        if !self.paragraph.is_empty() {
            self.paragraph.push(' ');
        }
        self.paragraph.push_str(line.trim());
    }

    fn flush_paragraph(&mut self) {
        if self.paragraph.is_empty() {
            return;
        }
        let text = clean_inline(&std::mem::take(&mut self.paragraph), CleanMode::Prose);
        self.current.sentences.extend(split_sentences(&text));
    }

    fn start_section(&mut self, level: usize, heading: String) {
        let finished = std::mem::take(&mut self.current);
        self.sections.push(finished);
        while self.heading_stack.last().is_some_and(|(l, _)| *l >= level) {
            self.heading_stack.pop();
        }
        self.heading_stack.push((level, heading));
        let mut path: Vec<String> = self.heading_stack.iter().map(|(_, h)| h.clone()).collect();
        if self.seen_paths.contains(&path) {
            let base = path.last().cloned().unwrap_or_default();
            let mut n = 2;
            loop {
                *path.last_mut().expect("path has a heading") = format!("{base} ({n})");
                if !self.seen_paths.contains(&path) {
                    break;
                }
                n += 1;
            }
        }
        self.seen_paths.insert(path.clone());
        self.current.heading_path = path;
    }

    fn add_table(&mut self, block: &str, span: Range<usize>) {
        let parsed = table::parse_table_block(block);
        self.diagnostics.malformed += parsed.malformed;
        let rows: Vec<Vec<RawCell>> = parsed.rows.into_iter().filter(|r| !r.is_empty()).collect();
        if rows.is_empty() {
            return;
        }
        let explicit_header = rows[0].iter().all(|c| c.header);
        let expanded = expand_spans(&rows);
        self.diagnostics.clipped_spans += expanded.clipped;
        let mut grid = expanded.grid.into_iter();
        let header_row = grid.next().unwrap_or_default();
        if !explicit_header {
            tracing::trace!("promoting first table row to header");
        }
        let header = header_row
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let name = name.trim();
                if name.is_empty() { format!("col_{}", i + 1) } else { name.to_string() }
            })
            .collect();
        self.current.tables.push(RawTable {
            caption: parsed.caption,
            header,
            grid: grid.collect(),
            source_span: span,
            position: self.current.sentences.len(),
        });
    }

    fn add_infobox(&mut self, inner: &str, span: Range<usize>) {
        let parts = split_top_level(inner, "|");
        let template_name = parts[0].split_whitespace().collect::<Vec<_>>().join(" ");
        let pairs = parts[1..]
            .iter()
            .filter_map(|param| {
                let (key, value) = param.split_once('=')?;
                let key = key.trim();
                if key.is_empty() || key.contains("{{") || key.contains("[[") {
                    return None;
                }
                let value = clean_inline(value.trim(), CleanMode::Cell).trim_end().to_string();
                Some((key.to_string(), value))
            })
            .collect();
        self.current.infoboxes.push(Infobox {
            template_name,
            pairs,
            source_span: span,
            position: self.current.sentences.len(),
        });
    }

    fn finish(mut self, title: &str, page_id: u64) -> WikiPage {
        self.flush_paragraph();
        self.sections.push(self.current);
        let lead_is_empty = {
            let lead = &self.sections[0];
            lead.sentences.is_empty() && lead.tables.is_empty() && lead.infoboxes.is_empty()
        };
        if lead_is_empty && self.sections.len() > 1 {
            self.sections.remove(0);
        }
        WikiPage {
            title: title.to_string(),
            page_id,
            sections: self.sections,
            diagnostics: self.diagnostics,
        }
    }
}
