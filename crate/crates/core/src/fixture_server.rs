//! In-process stand-in for the retriever, entity linker, semantic parser,
//! SPARQL endpoint and chat service, answering from canned fixtures.
//! Malformed requests get 400 with a message naming the problem.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use regex::Regex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::entity::{LinkRequest, LinkResponse, LinkedEntity};
use crate::eval::normalize;
use crate::index::{read_passages, Index, RetrieveRequest, RetrieveResponse, WireHit};
use crate::kb::{ParseRequest, ParseResponse};
use crate::llm::{ChatRequest, ChatResponse, CompletionRequest, MockBackend, PromptSet};

/// An entity the fixture linker knows, found by any alias in the request text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkerEntry {
    pub aliases: Vec<String>,
    pub kb_id: String,
    pub label: String,
    pub score: f64,
}

/// Canned responses, as stored in a fixture JSON file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSpec {
    /// Collection name to a passages JSONL file.
    pub collections: BTreeMap<String, PathBuf>,
    pub linker: Vec<LinkerEntry>,
    /// Parses keyed by normalized question.
    pub parses: BTreeMap<String, ParseResponse>,
    /// SPARQL JSON results keyed by query text (whitespace-collapsed).
    pub sparql: BTreeMap<String, Value>,
    /// Mock rule file answering `/chat`, backed by the stage heuristics.
    pub chat_rules: Option<PathBuf>,
}

#[derive(Default)]
pub struct Fixtures {
    collections: HashMap<String, Index>,
    linker: Vec<(Vec<Regex>, LinkerEntry)>,
    parses: HashMap<String, ParseResponse>,
    sparql: HashMap<String, Value>,
    chat: Option<MockBackend>,
    prompts: PromptSet,
    fail_chats: AtomicUsize,
    chat_calls: AtomicUsize,
}

fn collapse(query: &str) -> String {
    query.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Fixtures {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a [`FixtureSpec`] file; paths in it are relative to the file.
    pub fn load(path: &Path) -> Result<Self, String> {
        let err = |e: String| format!("{}: {e}", path.display());
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let spec: FixtureSpec = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut fixtures = Self::new();
        for (name, file) in &spec.collections {
            let passages = read_passages(&base.join(file)).map_err(|e| err(e.to_string()))?;
            let index = Index::build(passages).map_err(|e| err(e.to_string()))?;
            fixtures = fixtures.with_collection(name, index);
        }
        for entry in spec.linker {
            fixtures = fixtures.with_entity(entry);
        }
        for (q, p) in spec.parses {
            fixtures = fixtures.with_parse(&q, p);
        }
        for (q, v) in spec.sparql {
            fixtures = fixtures.with_sparql(&q, v);
        }
        if let Some(rules) = spec.chat_rules {
            fixtures = fixtures.with_chat(MockBackend::with_heuristics().load_rules(&base.join(rules))?);
        }
        Ok(fixtures)
    }

    pub fn with_collection(mut self, name: &str, index: Index) -> Self {
        self.collections.insert(name.into(), index);
        self
    }

    pub fn with_entity(mut self, entry: LinkerEntry) -> Self {
        let patterns = entry
            .aliases
            .iter()
            .map(|a| Regex::new(&format!(r"(?i)\b{}\b", regex::escape(a))).expect("escaped alias"))
            .collect();
        self.linker.push((patterns, entry));
        self
    }

    pub fn with_parse(mut self, question: &str, parse: ParseResponse) -> Self {
        self.parses.insert(normalize(question), parse);
        self
    }

    pub fn with_sparql(mut self, query: &str, results: Value) -> Self {
        self.sparql.insert(collapse(query), results);
        self
    }

    pub fn with_chat(mut self, backend: MockBackend) -> Self {
        self.chat = Some(backend);
        self
    }

    /// The next `n` chat calls answer 500.
    pub fn fail_next_chats(&self, n: usize) {
        self.fail_chats.store(n, Ordering::SeqCst);
    }

    pub fn chat_calls(&self) -> usize {
        self.chat_calls.load(Ordering::SeqCst)
    }

    fn link(&self, text: &str) -> Vec<LinkedEntity> {
        self.linker
            .iter()
            .filter_map(|(patterns, entry)| {
                let found = patterns.iter().zip(&entry.aliases).find(|(re, _)| re.is_match(text))?;
                Some(LinkedEntity {
                    surface: found.1.clone(),
                    kb_id: entry.kb_id.clone(),
                    label: entry.label.clone(),
                    score: entry.score,
                })
            })
            .collect()
    }
}

fn bad_request(message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": message.into() }))).into_response()
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Box<Response>> {
    serde_json::from_slice(body).map_err(|e| Box::new(bad_request(format!("invalid request body: {e}"))))
}

async fn retrieve(State(f): State<Arc<Fixtures>>, body: Bytes) -> Response {
    let req: RetrieveRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    if req.k == 0 {
        return bad_request("field k must be at least 1");
    }
    let Some(index) = f.collections.get(&req.collection) else {
        return bad_request(format!("field collection: unknown collection {:?}", req.collection));
    };
    let hits = index
        .search(&req.query, req.k)
        .into_iter()
        .map(|h| WireHit { doc_id: h.doc_id, score: h.score, text: h.text, title: h.title, kind: Some(h.kind) })
        .collect();
    Json(RetrieveResponse { hits }).into_response()
}

async fn link(State(f): State<Arc<Fixtures>>, body: Bytes) -> Response {
    match parse_body::<LinkRequest>(&body) {
        Ok(req) => Json(LinkResponse { entities: f.link(&req.text) }).into_response(),
        Err(resp) => *resp,
    }
}

async fn parse(State(f): State<Arc<Fixtures>>, body: Bytes) -> Response {
    let req: ParseRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    if req.question.trim().is_empty() {
        return bad_request("field question must be non-empty");
    }
    let reply = f
        .parses
        .get(&normalize(&req.question))
        .cloned()
        .unwrap_or(ParseResponse { sparql: String::new(), mentions: Vec::new() });
    Json(reply).into_response()
}

#[derive(Deserialize)]
struct SparqlParams {
    query: Option<String>,
}

async fn sparql(State(f): State<Arc<Fixtures>>, Query(params): Query<SparqlParams>, body: Bytes) -> Response {
    let from_form = form_query(&body);
    let Some(query) = params.query.or(from_form) else {
        return bad_request("missing query parameter");
    };
    let results = f
        .sparql
        .get(&collapse(&query))
        .cloned()
        .unwrap_or_else(|| json!({"head": {"vars": []}, "results": {"bindings": []}}));
    Json(results).into_response()
}

fn form_query(body: &[u8]) -> Option<String> {
    serde_urlencoded::from_bytes::<SparqlParams>(body).ok()?.query
}

async fn chat(State(f): State<Arc<Fixtures>>, body: Bytes) -> Response {
    f.chat_calls.fetch_add(1, Ordering::SeqCst);
    let req: ChatRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    let pending = f.fail_chats.load(Ordering::SeqCst);
    if pending > 0 {
        f.fail_chats.store(pending - 1, Ordering::SeqCst);
        return (StatusCode::INTERNAL_SERVER_ERROR, "injected failure").into_response();
    }
    let Some(backend) = &f.chat else {
        return (StatusCode::SERVICE_UNAVAILABLE, "no chat fixture").into_response();
    };
    // The protocol carries neither the stage nor the slot values; recover
    // both from the system prompt and the final user turn.
    let template = f.prompts.identify(&req.messages);
    let bindings = template
        .zip(req.messages.last())
        .and_then(|(t, last)| t.bindings_from(&last.content))
        .unwrap_or_default();
    let request = CompletionRequest {
        template: template.map(|t| t.name.clone()).unwrap_or_default(),
        messages: req.messages,
        bindings,
        max_tokens: req.max_tokens,
        temperature: req.temperature,
    };
    match backend.reply_for(&request) {
        Ok(content) => Json(ChatResponse { content }).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

pub fn router(fixtures: Arc<Fixtures>) -> Router {
    Router::new()
        .route("/retrieve", post(retrieve))
        .route("/link", post(link))
        .route("/parse", post(parse))
        .route("/sparql", post(sparql).get(sparql))
        .route("/chat", post(chat))
        .with_state(fixtures)
}

/// A running fixture server on a loopback port; stops when dropped.
pub struct FixtureServer {
    addr: SocketAddr,
    fixtures: Arc<Fixtures>,
    task: tokio::task::JoinHandle<()>,
}

impl FixtureServer {
    /// Binds `127.0.0.1:0` and serves on the current runtime.
    pub async fn start(fixtures: Fixtures) -> std::io::Result<Self> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let fixtures = Arc::new(fixtures);
        let app = router(fixtures.clone());
        let task = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!(error = %e, "fixture server stopped");
            }
        });
        Ok(Self { addr, fixtures, task })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn sparql_url(&self) -> String {
        format!("http://{}/sparql", self.addr)
    }

    pub fn fixtures(&self) -> &Fixtures {
        &self.fixtures
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}
