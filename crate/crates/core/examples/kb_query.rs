//! Knowledge-base path: link entities, get a SPARQL template from the
//! semantic parser, fill in the entity ids, run it, format the evidence.

use std::time::Duration;

use anyhow::anyhow;
use hetqa::entity::{EntityLinker, EntityMode};
use hetqa::fixture_server::{FixtureServer, Fixtures};
use hetqa::kb::{format_kb_evidence, substitute_entities, SemanticParser, SparqlClient};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/e2e");
    let server = FixtureServer::start(Fixtures::load(&dir.join("fixtures.json")).map_err(|e| anyhow!(e))?).await?;
    let timeout = Duration::from_secs(5);
    let linker = EntityLinker::new(&server.url(), timeout);
    let parser = SemanticParser::new(&server.url(), timeout);
    let sparql = SparqlClient::new(&server.sparql_url(), timeout);

    for question in ["What is the voice type of Bob Dylan?", "Did Ericson Core direct the film Point Break?", "Who founded the band Nirvana?"] {
        let entities = linker.link(question, &[], EntityMode::LinkerOnly).await?;
        let result = match parser.parse_query(question, &entities).await {
            Ok(parse) => {
                let query = substitute_entities(&parse, &entities)?;
                println!("{query}");
                sparql.execute(&query).await
            }
            Err(e) => {
                println!("no query: {e}");
                Default::default()
            }
        };
        println!("{}\n", format_kb_evidence(question, &result).text);
    }
    Ok(())
}
