//! Builds a BM25 index over text passages and table records, then searches it.
//!
//! ```text
//! cargo run --example bm25_search -- "when was NIRVANAnet founded"
//! ```

use hetqa::index::{read_passages, Index};

fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e");
    let mut passages = read_passages(&dir.join("text.jsonl"))?;
    passages.extend(read_passages(&dir.join("records.jsonl"))?);
    let index = Index::build(passages)?;
    let query = std::env::args().nth(1).unwrap_or_else(|| "Who founded the band Nirvana?".into());
    println!("{} passages indexed; top hits for {query:?}:", index.len());
    for hit in index.search(&query, 5) {
        println!("{:>7.3}  {:<6} {:?}  {}", hit.score, hit.doc_id, hit.kind, hit.text);
    }
    Ok(())
}
