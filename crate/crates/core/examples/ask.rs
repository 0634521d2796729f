//! Answers questions with the full pipeline over the fixture services and
//! prints each answer with its evidence pool.
//!
//! ```text
//! cargo run --example ask -- "Who published La Galatea?"
//! ```

use anyhow::anyhow;
use hetqa::config::{Endpoints, PipelineConfig};
use hetqa::fixture_server::{FixtureServer, Fixtures};
use hetqa::pipeline::Pipeline;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e");
    let server = FixtureServer::start(Fixtures::load(&dir.join("fixtures.json")).map_err(|e| anyhow!(e))?).await?;
    let config = PipelineConfig {
        endpoints: Endpoints {
            retriever: Some(server.url()),
            linker: Some(server.url()),
            parser: Some(server.url()),
            sparql: Some(server.sparql_url()),
            llm: None,
        },
        mock_rules: Some(dir.join("rules.json")),
        ..Default::default()
    };
    let pipeline = Pipeline::from_config(&config)?;
    let questions: Vec<String> = match std::env::args().nth(1) {
        Some(q) => vec![q],
        None => vec!["Who published La Galatea?".into(), "What is the voice type of Bob Dylan?".into()],
    };
    for q in questions {
        let answered = pipeline.answer(&q).await;
        println!("{}", answered.prediction(None).to_pretty_json());
        for m in &answered.diagnostics.messages {
            println!("  degraded: {m}");
        }
    }
    Ok(())
}
