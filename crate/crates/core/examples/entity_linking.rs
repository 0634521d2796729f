//! Entity linking with and without LLM-detected mention hints. The linker
//! misses "Oscars" on its own; the hint names the award it refers to.

use std::time::Duration;

use anyhow::anyhow;
use hetqa::entity::{resolve_entities, EntityLinker, EntityMode};
use hetqa::fixture_server::{FixtureServer, Fixtures};
use hetqa::llm::{Llm, MockBackend};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e");
    let server = FixtureServer::start(Fixtures::load(&dir.join("fixtures.json")).map_err(|e| anyhow!(e))?).await?;
    let linker = EntityLinker::new(&server.url(), Duration::from_secs(5));
    let llm = Llm::mock(MockBackend::new().load_rules(&dir.join("rules.json")).map_err(|e| anyhow!(e))?);

    let question = "Who won the Oscars best actress award in 1953?";
    for mode in [EntityMode::LinkerOnly, EntityMode::LlmEnriched] {
        let (set, errors) = resolve_entities(question, mode, &llm, Some(&linker), None).await;
        println!("{mode:?}: {} entities", set.len());
        for e in &set.entities {
            println!("  {} -> {} ({}, {:.2})", e.surface, e.kb_id, e.label, e.score);
        }
        for e in errors {
            println!("  error: {e}");
        }
    }
    Ok(())
}
