use serde::{Deserialize, Serialize};

use super::{Infobox, RawTable, Section, WikiPage};

/// Row terminator in linearized bodies.
pub const ROW_TERMINATOR: &str = ".<tr>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RecordKind {
    Table,
    Infobox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearizedRecord {
    pub record_id: String,
    pub page_title: String,
    pub section_title: String,
    pub context_before: Vec<String>,
    pub context_after: Vec<String>,
    pub body: String,
    pub kind: RecordKind,
    /// Set when there is nothing to index; skipped records are never written.
    #[serde(skip)]
    pub skip: bool,
}

impl LinearizedRecord {
    /// Text used for retrieval: context before, body, context after.
    pub fn passage_text(&self) -> String {
        self.context_before
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.body.as_str()))
            .chain(self.context_after.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Up to two sentences on each side of a table or infobox.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    pub before: Vec<String>,
    pub after: Vec<String>,
}

/// Context for an item that follows `position` sentences of `section`.
/// Positions past the end are clamped.
pub fn attach_context(section: &Section, position: usize) -> Context {
    let sentences = &section.sentences;
    let position = position.min(sentences.len());
    Context {
        before: sentences[position.saturating_sub(2)..position].to_vec(),
        after: sentences[position..(position + 2).min(sentences.len())].to_vec(),
    }
}

/// Renders a span-expanded table as `colname: cell, ... .<tr>` rows, prefixed
/// by the section title and caption when present. Empty cells are omitted and
/// rows with no non-empty cell produce no output.
pub fn linearize_table(
    record_id: impl Into<String>,
    table: &RawTable,
    page_title: &str,
    section_title: &str,
    ctx: Context,
) -> LinearizedRecord {
    let rows: Vec<String> = table
        .grid
        .iter()
        .filter_map(|row| {
            let pairs: Vec<String> = table
                .header
                .iter()
                .zip(row)
                .filter(|(_, cell)| !cell.trim().is_empty())
                .map(|(name, cell)| format!("{name}: {cell}"))
                .collect();
            (!pairs.is_empty()).then(|| format!("{}{ROW_TERMINATOR}", pairs.join(", ")))
        })
        .collect();

    let skip = rows.is_empty();
    let body = if skip {
        String::new()
    } else {
        let mut body = String::new();
        for prefix in [Some(section_title), table.caption.as_deref()].into_iter().flatten() {
            if !prefix.trim().is_empty() {
                body.push_str(prefix.trim());
                body.push_str(" ; ");
            }
        }
        body.push_str(&rows.join(" "));
        body
    };
    LinearizedRecord {
        record_id: record_id.into(),
        page_title: page_title.to_string(),
        section_title: section_title.to_string(),
        context_before: ctx.before,
        context_after: ctx.after,
        body,
        kind: RecordKind::Table,
        skip,
    }
}

/// Renders an infobox as a single row: `page_title ; key: value, ... .<tr>`.
pub fn linearize_infobox(
    record_id: impl Into<String>,
    infobox: &Infobox,
    page_title: &str,
    section_title: &str,
) -> LinearizedRecord {
    let pairs: Vec<String> = infobox
        .pairs
        .iter()
        .filter(|(_, v)| !v.trim().is_empty())
        .map(|(k, v)| format!("{k}: {v}"))
        .collect();
    let skip = pairs.is_empty();
    let body = if skip {
        String::new()
    } else {
        format!("{page_title} ; {}{ROW_TERMINATOR}", pairs.join(", "))
    };
    LinearizedRecord {
        record_id: record_id.into(),
        page_title: page_title.to_string(),
        section_title: section_title.to_string(),
        context_before: Vec::new(),
        context_after: Vec::new(),
        body,
        kind: RecordKind::Infobox,
        skip,
    }
}

/// Linearizes every table and infobox on a page, skipped ones included.
/// Record ids are `<page_id>-t<n>` and `<page_id>-i<n>`, numbered in page
/// order.
pub fn linearize_page(page: &WikiPage) -> Vec<LinearizedRecord> {
    let mut records = Vec::new();
    let (mut tables, mut infoboxes) = (0, 0);
    for section in &page.sections {
        for infobox in &section.infoboxes {
            infoboxes += 1;
            let id = format!("{}-i{infoboxes}", page.page_id);
            records.push(linearize_infobox(id, infobox, &page.title, section.title()));
        }
        for table in &section.tables {
            tables += 1;
            let id = format!("{}-t{tables}", page.page_id);
            let ctx = attach_context(section, table.position);
            records.push(linearize_table(id, table, &page.title, section.title(), ctx));
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            caption: None,
            header: header.iter().map(|s| s.to_string()).collect(),
            grid: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            source_span: 0..0,
            position: 0,
        }
    }

    fn section(n: usize) -> Section {
        Section {
            sentences: (1..=n).map(|i| format!("s{i}")).collect(),
            ..Section::default()
        }
    }

    #[test]
    fn minimal_table() {
        let r = linearize_table("x", &table(&["X"], &[&["v"]]), "P", "", Context::default());
        assert_eq!(r.body, "X: v.<tr>");
        assert!(!r.skip);
    }

    #[test]
    fn empty_cells_are_omitted() {
        let t = table(&["a", "b"], &[&["1", ""], &["3", "4"]]);
        let r = linearize_table("x", &t, "P", "", Context::default());
        assert_eq!(r.body, "a: 1.<tr> a: 3, b: 4.<tr>");
    }

    #[test]
    fn table_without_data_rows_is_skipped() {
        let r = linearize_table("x", &table(&["a"], &[]), "P", "S", Context::default());
        assert!(r.skip);
        assert!(r.body.is_empty());
        let r = linearize_table("x", &table(&["a"], &[&["  "]]), "P", "S", Context::default());
        assert!(r.skip);
    }

    #[test]
    fn section_and_caption_prefix() {
        let mut t = table(&["a"], &[&["1"]]);
        t.caption = Some("Novels".into());
        let r = linearize_table("x", &t, "P", "Fiction", Context::default());
        assert_eq!(r.body, "Fiction ; Novels ; a: 1.<tr>");
    }

    #[test]
    fn infobox_is_one_row() {
        let ib = Infobox {
            template_name: "Infobox writer".into(),
            pairs: vec![("Born".into(), "1961".into())],
            source_span: 0..0,
            position: 0,
        };
        let r = linearize_infobox("i", &ib, "Arundhati Roy", "");
        assert_eq!(r.body, "Arundhati Roy ; Born: 1961.<tr>");
        assert_eq!(r.kind, RecordKind::Infobox);
    }

    #[test]
    fn infobox_duplicates_and_empty() {
        let mut ib = Infobox {
            template_name: "Infobox".into(),
            pairs: vec![("Label".into(), "A".into()), ("Label".into(), "B".into())],
            source_span: 0..0,
            position: 0,
        };
        assert_eq!(linearize_infobox("i", &ib, "P", "").body, "P ; Label: A, Label: B.<tr>");
        ib.pairs.clear();
        assert!(linearize_infobox("i", &ib, "P", "").skip);
    }

    #[test]
    fn context_windows() {
        let ctx = attach_context(&section(5), 0);
        assert_eq!((ctx.before.len(), ctx.after), (0, vec!["s1".to_string(), "s2".into()]));
        let ctx = attach_context(&section(5), 3);
        assert_eq!(ctx.before, vec!["s2", "s3"]);
        assert_eq!(ctx.after, vec!["s4", "s5"]);
        let ctx = attach_context(&section(1), 1);
        assert_eq!(ctx.before, vec!["s1"]);
        assert!(ctx.after.is_empty());
        let ctx = attach_context(&section(2), 99);
        assert_eq!(ctx.before, vec!["s1", "s2"]);
    }

    #[test]
    fn record_json_shape() {
        let r = linearize_table("7-t1", &table(&["X"], &[&["v"]]), "P", "S", Context::default());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"record_id":"7-t1","page_title":"P","section_title":"S","context_before":[],"context_after":[],"body":"S ; X: v.<tr>","kind":"TABLE"}"#
        );
    }
}
