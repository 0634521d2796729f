//! Runs the `/ask` service over the fixture services.
//!
//! ```text
//! cargo run --example service
//! curl -s localhost:8080/ask -d '{"question":"Who published La Galatea?"}' -H 'content-type: application/json'
//! ```

use anyhow::anyhow;
use hetqa::config::{Endpoints, PipelineConfig};
use hetqa::fixture_server::{FixtureServer, Fixtures};
use hetqa::pipeline::Pipeline;
use hetqa::service;

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
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into()).parse()?;
    println!("listening on {addr}");
    service::serve(Pipeline::from_config(&config)?, addr).await?;
    Ok(())
}
