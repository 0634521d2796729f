//! `{| ... |}` table parsing and colspan/rowspan expansion.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::markup::{clean_inline, find_single_pipe, split_top_level, CleanMode};

/// Upper bound on a single span, mirroring the HTML limits.
pub const MAX_COLSPAN: usize = 1000;
pub const MAX_ROWSPAN: usize = 65534;

static SPAN_ATTR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)\b(colspan|rowspan)\s*=\s*["']?\s*([0-9]+)"#).unwrap()
});

/// One cell as written in the source, before span expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCell {
    pub text: String,
    pub colspan: usize,
    pub rowspan: usize,
    pub header: bool,
}

impl RawCell {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into(), colspan: 1, rowspan: 1, header: false }
    }

    pub fn spanning(text: impl Into<String>, colspan: usize, rowspan: usize) -> Self {
        Self { text: text.into(), colspan, rowspan, header: false }
    }
}

/// A table after span expansion. `grid` holds the data rows only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub caption: Option<String>,
    pub header: Vec<String>,
    pub grid: Vec<Vec<String>>,
    pub source_span: Range<usize>,
    /// Number of section sentences that precede the table.
    pub position: usize,
}

impl RawTable {
    pub fn columns(&self) -> usize {
        self.header.len()
    }
}

/// Result of [`expand_spans`]: a rectangular grid plus how many spans had to
/// be clipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expanded {
    pub grid: Vec<Vec<String>>,
    pub clipped: usize,
}

/// Expands colspan/rowspan so that spanned text is copied into every grid
/// position it covers. The output is rectangular; positions no cell covers
/// are empty strings. Rowspans running past the last row and spans above
/// the HTML maxima are clipped.
pub fn expand_spans(rows: &[Vec<RawCell>]) -> Expanded {
    let n_rows = rows.len();
    let mut grid: Vec<Vec<Option<String>>> = vec![Vec::new(); n_rows];
    let mut clipped = 0;

    for (r, row) in rows.iter().enumerate() {
        let mut col = 0;
        for cell in row {
            while grid[r].get(col).is_some_and(Option::is_some) {
                col += 1;
            }
            let mut colspan = cell.colspan.max(1);
            if colspan > MAX_COLSPAN {
                colspan = MAX_COLSPAN;
                clipped += 1;
            }
            let mut rowspan = cell.rowspan.max(1);
            if rowspan > MAX_ROWSPAN {
                rowspan = MAX_ROWSPAN;
                clipped += 1;
            }
            if r + rowspan > n_rows {
                rowspan = n_rows - r;
                clipped += 1;
            }
            for target in grid.iter_mut().skip(r).take(rowspan) {
                if target.len() < col + colspan {
                    target.resize(col + colspan, None);
                }
                for slot in &mut target[col..col + colspan] {
                    // Overlapping spans: the earlier cell keeps the slot.
                    if slot.is_none() {
                        *slot = Some(cell.text.clone());
                    }
                }
            }
            col += colspan;
        }
    }
    if clipped > 0 {
        tracing::debug!(clipped, "clipped table spans exceeding bounds");
    }

    let width = grid.iter().map(Vec::len).max().unwrap_or(0);
    let grid = grid
        .into_iter()
        .map(|row| {
            let mut row: Vec<String> = row.into_iter().map(Option::unwrap_or_default).collect();
            row.resize(width, String::new());
            row
        })
        .collect();
    Expanded { grid, clipped }
}

/// Source-level table structure before expansion.
#[derive(Debug, Clone, Default)]
pub(crate) struct ParsedTable {
    pub caption: Option<String>,
    pub rows: Vec<Vec<RawCell>>,
    pub malformed: usize,
}

/// Parses a table block that starts with `{|`. Nested tables are flattened
/// into the text of the enclosing cell.
pub(crate) fn parse_table_block(block: &str) -> ParsedTable {
    let lines: Vec<&str> = block.lines().collect();
    let mut parsed = ParsedTable::default();
    let mut current: Vec<RawCell> = Vec::new();
    let mut depth_closed = false;

    let mut i = 1;
    while i < lines.len() {
        let line = lines[i].trim_start();
        if line.starts_with("|}") {
            depth_closed = true;
            break;
        } else if line.starts_with("{|") {
            let end = nested_end(&lines, i);
            let nested = parse_table_block(&lines[i..end].join("\n"));
            parsed.malformed += nested.malformed;
            let flat = nested
                .rows
                .iter()
                .flatten()
                .map(|c| c.text.trim())
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            match current.last_mut() {
                Some(cell) => {
                    cell.text.push(' ');
                    cell.text.push_str(&flat);
                }
                None => current.push(RawCell::new(flat)),
            }
            i = end;
            continue;
        } else if let Some(rest) = line.strip_prefix("|+") {
            let text = match find_single_pipe(rest) {
                Some(p) => &rest[p + 1..],
                None => rest,
            };
            let caption = clean_cell(text);
            if !caption.trim().is_empty() {
                parsed.caption = Some(caption.trim_end().to_string());
            }
        } else if line.starts_with("|-") {
            if !current.is_empty() {
                parsed.rows.push(std::mem::take(&mut current));
            }
        } else if let Some(rest) = line.strip_prefix('!') {
            for raw in split_cells(rest, true) {
                current.push(make_cell(raw, true));
            }
        } else if let Some(rest) = line.strip_prefix('|') {
            for raw in split_cells(rest, false) {
                current.push(make_cell(raw, false));
            }
        } else if let Some(cell) = current.last_mut() {
            cell.text.push('\n');
            cell.text.push_str(lines[i]);
        }
        i += 1;
    }
    if !current.is_empty() {
        parsed.rows.push(current);
    }
    if !depth_closed {
        parsed.malformed += 1;
    }
    for cell in parsed.rows.iter_mut().flatten() {
        cell.text = clean_cell(&cell.text);
    }
    parsed
}

/// Index one past the `|}` line closing the table opened at `start`.
fn nested_end(lines: &[&str], start: usize) -> usize {
    let mut depth = 0usize;
    for (offset, line) in lines[start..].iter().enumerate() {
        let line = line.trim_start();
        if line.starts_with("{|") {
            depth += 1;
        } else if line.starts_with("|}") {
            depth -= 1;
            if depth == 0 {
                return start + offset + 1;
            }
        }
    }
    lines.len()
}

fn split_cells(rest: &str, header: bool) -> Vec<&str> {
    let mut cells = Vec::new();
    for piece in split_top_level(rest, "||") {
        if header {
            cells.extend(split_top_level(piece, "!!"));
        } else {
            cells.push(piece);
        }
    }
    cells
}

fn make_cell(raw: &str, header: bool) -> RawCell {
    let (attrs, content) = match find_single_pipe(raw) {
        Some(p) => (&raw[..p], &raw[p + 1..]),
        None => ("", raw),
    };
    let mut cell = RawCell { text: content.to_string(), colspan: 1, rowspan: 1, header };
    for caps in SPAN_ATTR.captures_iter(attrs) {
        let value = caps[2].parse::<usize>().unwrap_or(1).clamp(1, usize::MAX / 2);
        if caps[1].eq_ignore_ascii_case("colspan") {
            cell.colspan = value;
        } else {
            cell.rowspan = value;
        }
    }
    cell
}

/// Cell text is trimmed at the markup level and then cleaned; whitespace an
/// elided template leaves at the end survives (collapsed to one space).
fn clean_cell(raw: &str) -> String {
    clean_inline(raw.trim(), CleanMode::Cell)
}
