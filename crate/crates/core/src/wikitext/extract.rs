//! Whole-corpus extraction: pages to linearized records and text passages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dump::PageSource;
use super::{linearize_page, parse_page, LinearizedRecord, RecordKind, WikiPage};
use crate::index::{Passage, PassageKind};

/// Sentences per text passage.
pub const SENTENCES_PER_PASSAGE: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub pages: usize,
    pub tables: usize,
    pub infoboxes: usize,
    /// Tables with no non-empty cell.
    pub skipped: usize,
    pub malformed: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub records: Vec<LinearizedRecord>,
    pub passages: Vec<Passage>,
    pub summary: ExtractSummary,
}

/// Splits each section's sentences into passages of up to
/// [`SENTENCES_PER_PASSAGE`], prefixed by the section title when there is one.
/// Ids are `{page_id}-p{n}`.
pub fn text_passages(page: &WikiPage) -> Vec<Passage> {
    let mut out = Vec::new();
    for section in &page.sections {
        for chunk in section.sentences.chunks(SENTENCES_PER_PASSAGE) {
            let body = chunk.join(" ");
            let text = match section.title() {
                "" => body,
                title => format!("{title} ; {body}"),
            };
            out.push(Passage {
                doc_id: format!("{}-p{}", page.page_id, out.len() + 1),
                title: page.title.clone(),
                text,
                kind: PassageKind::Text,
            });
        }
    }
    out
}

/// Parses every page in parallel. Output order follows `pages`.
pub fn extract(pages: &[PageSource]) -> Extraction {
    let per_page: Vec<(Vec<LinearizedRecord>, Vec<Passage>, usize)> = pages
        .par_iter()
        .map(|source| {
            let page = parse_page(&source.wikitext, &source.title, source.page_id);
            (linearize_page(&page), text_passages(&page), page.diagnostics.malformed)
        })
        .collect();

    let mut out = Extraction { summary: ExtractSummary { pages: pages.len(), ..Default::default() }, ..Default::default() };
    for (records, passages, malformed) in per_page {
        out.summary.malformed += malformed;
        for record in records {
            if record.skip {
                out.summary.skipped += 1;
                continue;
            }
            match record.kind {
                RecordKind::Table => out.summary.tables += 1,
                RecordKind::Infobox => out.summary.infoboxes += 1,
            }
            out.records.push(record);
        }
        out.passages.extend(passages);
    }
    out
}
