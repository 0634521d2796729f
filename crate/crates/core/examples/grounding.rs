//! Draft an answer from the model's own knowledge, split it into claims and
//! keep only the claims the retrieved passages support.

use anyhow::anyhow;
use hetqa::grounding::{draft_answer, grounded_claims, split_claims};
use hetqa::index::{read_passages, Index};
use hetqa::llm::{Llm, MockBackend};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e");
    let index = Index::build(read_passages(&dir.join("text.jsonl"))?)?;
    let llm = Llm::mock(MockBackend::with_heuristics().load_rules(&dir.join("rules.json")).map_err(|e| anyhow!(e))?);

    let question = "What was Ericson Core's first job in film?";
    let draft = draft_answer(question, &llm).await?;
    println!("draft: {draft}");
    let claims = split_claims(&draft, &llm).await;
    let hits = index.search(question, 5);
    let kept = grounded_claims(&claims, &hits, &llm).await;
    for claim in &claims {
        let verified = kept.iter().any(|k| k.text == claim.text);
        println!("{} {}", if verified { "kept   " } else { "dropped" }, claim.text);
    }
    Ok(())
}
