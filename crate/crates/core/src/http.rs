//! Shared JSON-over-HTTP plumbing for the service clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Why a remote call failed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CallError {
    /// Connection refused, timeout, or a 5xx reply.
    #[error("service unavailable: {0}")]
    Unavailable(String),
    /// The service answered with something that does not fit the protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub(crate) fn client(timeout: Duration) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(timeout)
        .build()
        .expect("static HTTP client configuration is valid")
}

pub(crate) fn join_url(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path.trim_start_matches('/'))
}

pub(crate) async fn post_json<Req, Resp>(
    client: &reqwest::Client,
    url: &str,
    body: &Req,
) -> Result<Resp, CallError>
where
    Req: Serialize + ?Sized,
    Resp: DeserializeOwned,
{
    let response = client
        .post(url)
        .json(body)
        .send()
        .await
        .map_err(|e| CallError::Unavailable(format!("{url}: {e}")))?;
    decode(url, response).await
}

pub(crate) async fn decode<Resp: DeserializeOwned>(
    url: &str,
    response: reqwest::Response,
) -> Result<Resp, CallError> {
    let status = response.status();
    if status.is_server_error() {
        return Err(CallError::Unavailable(format!("{url}: HTTP {status}")));
    }
    let bytes = response
        .bytes()
        .await
        .map_err(|e| CallError::Unavailable(format!("{url}: {e}")))?;
    if !status.is_success() {
        let body = String::from_utf8_lossy(&bytes);
        return Err(CallError::Protocol(format!("{url}: HTTP {status}: {}", body.trim())));
    }
    serde_json::from_slice(&bytes).map_err(|e| CallError::Protocol(format!("{url}: {e}")))
}
