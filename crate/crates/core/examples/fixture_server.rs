//! Serves the bundled end-to-end fixtures (retriever, linker, parser, SPARQL
//! and chat) on a loopback port until interrupted.
//!
//! ```text
//! cargo run --example fixture_server
//! HETQA_RETRIEVER_ENDPOINT=... cargo run --bin hetqa -- ask "Who published La Galatea?"
//! ```

use std::path::Path;

use anyhow::anyhow;
use hetqa::fixture_server::{FixtureServer, Fixtures};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let spec = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/e2e/fixtures.json").into());
    let fixtures = Fixtures::load(Path::new(&spec)).map_err(|e| anyhow!(e))?;
    let server = FixtureServer::start(fixtures).await?;
    let url = server.url();
    println!("fixture server at {url}");
    for var in ["RETRIEVER", "LINKER", "PARSER", "LLM"] {
        println!("export HETQA_{var}_ENDPOINT={url}");
    }
    println!("export HETQA_SPARQL_ENDPOINT={}", server.sparql_url());
    tokio::signal::ctrl_c().await?;
    Ok(())
}
