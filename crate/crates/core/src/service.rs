//! HTTP question-answering service: `POST /ask` and `GET /health`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

use crate::fusion::EvidenceKind;
use crate::pipeline::{Answered, Pipeline};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub question: String,
}

/// The answer and its evidence pool, as returned by `/ask` and printed by
/// the `ask` command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
    pub evidences: Vec<(EvidenceKind, String)>,
}

impl From<&Answered> for AskResponse {
    fn from(a: &Answered) -> Self {
        Self {
            answer: a.answer.text.clone(),
            evidences: a.answer.pool.items.iter().map(|i| (i.kind, i.text.clone())).collect(),
        }
    }
}

struct AppState {
    pipeline: Pipeline,
    permits: Semaphore,
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": message }))).into_response()
}

async fn ask(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: AskRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("invalid request body: {e}")),
    };
    if req.question.trim().is_empty() {
        return bad_request("field question must be non-empty".into());
    }
    let Ok(_permit) = state.permits.acquire().await else {
        return StatusCode::SERVICE_UNAVAILABLE.into_response();
    };
    let answered = state.pipeline.answer(&req.question).await;
    if answered.diagnostics.evidence_failures > 0 {
        tracing::info!(failures = ?answered.diagnostics.messages, "answered with degraded evidence");
    }
    Json(AskResponse::from(&answered)).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

/// Routes for `pipeline`, answering at most `max_in_flight` questions at once.
pub fn router(pipeline: Pipeline, max_in_flight: usize) -> Router {
    let state = Arc::new(AppState { pipeline, permits: Semaphore::new(max_in_flight.max(1)) });
    Router::new().route("/ask", post(ask)).route("/health", get(health)).with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(pipeline: Pipeline, addr: SocketAddr) -> std::io::Result<()> {
    let cap = pipeline.config().service_max_in_flight;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(pipeline, cap)).await
}
