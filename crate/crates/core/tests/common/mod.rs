//! Shared setup for the end-to-end fixture corpus.
#![allow(dead_code)]

use std::path::PathBuf;

use hetqa::config::{Endpoints, PipelineConfig};
use hetqa::fixture_server::{FixtureServer, Fixtures};

pub fn e2e_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e")
}

pub async fn start_fixtures() -> FixtureServer {
    let fixtures = Fixtures::load(&e2e_dir().join("fixtures.json")).expect("e2e fixtures load");
    FixtureServer::start(fixtures).await.expect("fixture server binds")
}

/// Every service pointed at `server`, mock LLM with the planted rules.
pub fn e2e_config(server: &FixtureServer) -> PipelineConfig {
    PipelineConfig {
        endpoints: Endpoints {
            retriever: Some(server.url()),
            linker: Some(server.url()),
            parser: Some(server.url()),
            sparql: Some(server.sparql_url()),
            llm: Some(server.url()),
        },
        mock_rules: Some(e2e_dir().join("rules.json")),
        ..PipelineConfig::default()
    }
}

/// A loopback URL nothing listens on.
pub fn unreachable_url() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").expect("bind");
    let port = listener.local_addr().expect("addr").port();
    drop(listener);
    format!("http://127.0.0.1:{port}")
}

pub fn unreachable_config() -> PipelineConfig {
    let dead = unreachable_url();
    PipelineConfig {
        endpoints: Endpoints {
            retriever: Some(dead.clone()),
            linker: Some(dead.clone()),
            parser: Some(dead.clone()),
            sparql: Some(format!("{dead}/sparql")),
            llm: Some(dead),
        },
        retry_base_ms: 5,
        ..PipelineConfig::default()
    }
}
