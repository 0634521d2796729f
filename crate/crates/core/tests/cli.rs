//! The `hetqa` binary and the HTTP service.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use hetqa::fixture_server::FixtureServer;
use hetqa::pipeline::Pipeline;
use hetqa::service::{self, AskResponse};
use serde_json::json;

fn hetqa() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hetqa"));
    for var in ["RETRIEVER", "LINKER", "PARSER", "SPARQL", "LLM"] {
        cmd.env_remove(format!("HETQA_{var}_ENDPOINT"));
    }
    cmd
}

fn with_fixture_env(mut cmd: Command, server: &FixtureServer) -> Command {
    for var in ["RETRIEVER", "LINKER", "PARSER", "LLM"] {
        cmd.env(format!("HETQA_{var}_ENDPOINT"), server.url());
    }
    cmd.env("HETQA_SPARQL_ENDPOINT", server.sparql_url());
    cmd
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    let rules = common::e2e_dir().join("rules.json");
    std::fs::write(&path, json!({ "mock_rules": rules }).to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

async fn run(mut cmd: Command) -> Output {
    tokio::task::spawn_blocking(move || cmd.output().unwrap()).await.unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

async fn serve(pipeline: Pipeline) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, service::router(pipeline, 4)).await.unwrap() });
    format!("http://{addr}")
}

#[tokio::test(flavor = "multi_thread")]
async fn cli_ask_and_service_agree() {
    let server = common::start_fixtures().await;
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let pipeline = Pipeline::from_config(&common::e2e_config(&server)).unwrap();
    let base = serve(pipeline).await;
    let client = reqwest::Client::new();

    let questions = ["Who published La Galatea?", "What is the voice type of Bob Dylan?", "Which island is home to Alyssa Cole's primary residence?"];
    for q in questions {
        let mut cmd = with_fixture_env(hetqa(), &server);
        cmd.args(["--config", &config, "ask", q]);
        let out = run(cmd).await;
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let from_cli: AskResponse = serde_json::from_str(&stdout(&out)).unwrap();

        let resp = client.post(format!("{base}/ask")).json(&json!({ "question": q })).send().await.unwrap();
        assert_eq!(resp.status(), 200);
        let from_service: AskResponse = resp.json().await.unwrap();
        assert_eq!(from_cli, from_service, "{q}");

        // The fixture chat server plays the same rules over the wire.
        let mut cmd = with_fixture_env(hetqa(), &server);
        cmd.args(["--config", &config, "--backend", "remote", "ask", q]);
        let out = run(cmd).await;
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let remote: AskResponse = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(remote, from_cli, "{q} over remote chat");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn service_validates_requests() {
    let server = common::start_fixtures().await;
    let base = serve(Pipeline::from_config(&common::e2e_config(&server)).unwrap()).await;
    let client = reqwest::Client::new();
    let health: serde_json::Value = client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health, json!({"status": "ok"}));
    for body in ["{}", "{\"question\": \"  \"}", "{\"question\": \"q\", \"k\": 3}", "nope"] {
        let resp = client.post(format!("{base}/ask")).header("content-type", "application/json").body(body).send().await.unwrap();
        assert_eq!(resp.status(), 400, "{body}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn eval_writes_predictions_and_report() {
    let server = common::start_fixtures().await;
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let preds = dir.path().join("preds.jsonl");
    let report = dir.path().join("report.json");
    let dataset = common::e2e_dir().join("dataset.jsonl");
    let mut cmd = with_fixture_env(hetqa(), &server);
    cmd.args(["--config", &config, "--out", preds.to_str().unwrap(), "eval", dataset.to_str().unwrap()])
        .args(["--ablation", "text;text,tables,kb", "--report", report.to_str().unwrap()]);
    let out = run(cmd).await;
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert!(table.lines().any(|l| l.starts_with("text+tables+kb ")), "{table}");
    assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 20);
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert!(reports[1]["em_rate"].as_f64().unwrap() >= 0.9);
}

#[test]
fn extract_reproduces_the_stored_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.jsonl");
    let text = dir.path().join("text.jsonl");
    let pages = common::e2e_dir().join("pages");
    let o = hetqa()
        .args(["--out", out.to_str().unwrap(), "extract", pages.to_str().unwrap(), "--text-out", text.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "pages: 9, tables: 15, infoboxes: 5, skipped: 0, records: 20");
    let stored = std::fs::read_to_string(common::e2e_dir().join("records.jsonl")).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stored);
    assert!(std::fs::read_to_string(&text).unwrap().lines().count() > 0);
}

#[test]
fn index_and_triplets_commands() {
    let dir = tempfile::tempdir().unwrap();
    let index = dir.path().join("text.idx");
    let passages = common::e2e_dir().join("text.jsonl");
    let o = hetqa().args(["--out", index.to_str().unwrap(), "index", passages.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "indexed 30 passages");

    let positives = dir.path().join("pos.tsv");
    std::fs::write(&positives, "who founded nirvana\tt01\nelton john debut\tt04\n").unwrap();
    let triplets = |seed: &str| {
        let o = hetqa()
            .args(["--seed", seed, "triplets", "--positives", positives.to_str().unwrap(), "--pool", passages.to_str().unwrap(), "--n-neg", "4"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let a = triplets("3");
    assert_eq!(a.lines().count(), 8);
    assert_eq!(a, triplets("3"));
    for line in a.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert_ne!(cols[1], cols[2]);
    }
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| hetqa().args(args).output().unwrap().status.code();
    assert_eq!(code(&["--out", "/dev/null", "extract", "/nonexistent/dump.xml"]), Some(2));
    assert_eq!(code(&["--config", "/nonexistent/config.json", "ask", "q"]), Some(2));
    assert_eq!(code(&["--sources", "text,bogus", "ask", "q"]), Some(2));
    assert_eq!(code(&["--backend", "remote", "ask", "q"]), Some(2));
    assert_eq!(code(&["eval", "/nonexistent/dataset.jsonl"]), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("empty.xml");
    std::fs::write(&dump, "<mediawiki></mediawiki>\n").unwrap();
    let out = dir.path().join("records.jsonl");
    let o = hetqa().args(["--out", out.to_str().unwrap(), "extract", dump.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "pages: 0, tables: 0, infoboxes: 0, skipped: 0, records: 0");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn ask_without_services_gives_the_sentinel() {
    let o = hetqa().args(["ask", "Who founded the band Nirvana?"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let reply: AskResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(reply.answer, hetqa::fusion::NO_ANSWER);
}
