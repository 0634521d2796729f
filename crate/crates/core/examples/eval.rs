//! Evaluates the fixture dataset under growing source sets and prints the
//! metric table plus the error breakdown of the last configuration.

use std::collections::BTreeSet;

use anyhow::anyhow;
use hetqa::config::{Endpoints, PipelineConfig, Source};
use hetqa::eval::{load_dataset, render_breakdown, render_table, run_ablation, EvalOptions};
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
    let dataset = load_dataset(&dir.join("dataset.jsonl"))?;
    let configs: Vec<BTreeSet<Source>> = vec![
        [Source::Text].into(),
        [Source::Text, Source::Tables].into(),
        [Source::Text, Source::Tables, Source::Kb].into(),
        Source::ALL.into_iter().collect(),
    ];
    let runs = run_ablation(&dataset, &pipeline, &configs, &EvalOptions::default()).await?;
    let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
    print!("{}", render_table(&reports));
    println!();
    print!("{}", render_breakdown(&reports[reports.len() - 1].errors));
    Ok(())
}
