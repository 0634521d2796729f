//! Samples retriever training triplets: every positive gets `n_neg`
//! distinct negatives from the pool, reproducibly for a given seed.

use hetqa::index::{generate_triplets, read_passages, write_triplets_tsv};

fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e");
    let pool: Vec<String> = read_passages(&dir.join("records.jsonl"))?.into_iter().map(|p| p.doc_id).collect();
    let positives = vec![
        ("what year was nirvananet founded".to_string(), "3-t1".to_string()),
        ("rugby world cup 1995 winner".to_string(), "9-t1".to_string()),
    ];
    let triplets = generate_triplets(&positives, &pool, 4, 7)?;
    write_triplets_tsv(std::io::stdout().lock(), &triplets)?;
    Ok(())
}
