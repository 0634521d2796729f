//! Parses a directory of `.wiki` pages (or an XML dump) and prints the
//! linearized tables and infoboxes.
//!
//! ```text
//! cargo run --example extract [path]
//! ```

use std::path::PathBuf;

use hetqa::wikitext::{extract, read_pages};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e/pages"));
    let pages = read_pages(&path)?;
    let extraction = extract(&pages);
    for record in &extraction.records {
        println!("[{} {:?}] {}", record.record_id, record.kind, record.body);
    }
    let s = extraction.summary;
    println!("\n{} pages, {} tables, {} infoboxes, {} text passages", s.pages, s.tables, s.infoboxes, extraction.passages.len());
    Ok(())
}
