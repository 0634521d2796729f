use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{sort_hits, Hit, PassageKind, RetrievalError, Retriever};
use crate::http;

/// `POST /retrieve` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveRequest {
    pub collection: String,
    pub query: String,
    pub k: usize,
}

/// `POST /retrieve` response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    pub hits: Vec<WireHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireHit {
    pub doc_id: String,
    pub score: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    /// Not part of the core protocol; servers that index mixed collections
    /// may tag table vs infobox hits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<PassageKind>,
}

/// Client for a dense retrieval service speaking the `/retrieve` protocol.
#[derive(Debug, Clone)]
pub struct RemoteRetriever {
    client: reqwest::Client,
    url: String,
    collection: String,
    kind: PassageKind,
}

impl RemoteRetriever {
    /// `kind` labels hits the server does not tag itself.
    pub fn new(endpoint: &str, collection: impl Into<String>, kind: PassageKind, timeout: Duration) -> Self {
        Self {
            client: http::client(timeout),
            url: http::join_url(endpoint, "retrieve"),
            collection: collection.into(),
            kind,
        }
    }
}

#[async_trait]
impl Retriever for RemoteRetriever {
    async fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, RetrievalError> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let request = RetrieveRequest { collection: self.collection.clone(), query: query.into(), k };
        let response: RetrieveResponse = http::post_json(&self.client, &self.url, &request).await?;
        let mut hits = Vec::with_capacity(response.hits.len());
        for hit in response.hits {
            if hit.doc_id.is_empty() || !hit.score.is_finite() {
                return Err(RetrievalError::ProtocolError(format!(
                    "invalid hit {:?} with score {}",
                    hit.doc_id, hit.score
                )));
            }
            hits.push(Hit { doc_id: hit.doc_id, title: hit.title, score: hit.score, kind: hit.kind.unwrap_or(self.kind), text: hit.text });
        }
        sort_hits(&mut hits);
        hits.truncate(k);
        Ok(hits)
    }
}
