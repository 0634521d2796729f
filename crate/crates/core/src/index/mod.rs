//! Passage indexes, retrieval (local BM25 or a remote dense retriever) and
//! retriever-training triplets.

mod bm25;
mod remote;
mod triplets;

use std::path::Path;
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use bm25::{index_terms, is_stopword, sort_hits, tokenize, Index, B, K1};
pub use remote::{RemoteRetriever, RetrieveRequest, RetrieveResponse, WireHit};
pub use triplets::{generate_triplets, DEFAULT_NEGATIVES, read_triplets_tsv, write_triplets_tsv, TrainingTriplet, TripletError};

use crate::wikitext::{LinearizedRecord, RecordKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PassageKind {
    Text,
    Table,
    Infobox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
    pub kind: PassageKind,
}

impl From<&LinearizedRecord> for Passage {
    fn from(record: &LinearizedRecord) -> Self {
        Passage {
            doc_id: record.record_id.clone(),
            title: record.page_title.clone(),
            text: record.passage_text(),
            kind: match record.kind {
                RecordKind::Table => PassageKind::Table,
                RecordKind::Infobox => PassageKind::Infobox,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    /// Higher is better.
    pub score: f64,
    pub kind: PassageKind,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("passage {0:?} has empty text")]
    EmptyPassage(String),
    #[error("index exceeds u32::MAX documents")]
    TooLarge,
    #[error("index file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("retrieval unavailable: {0}")]
    RetrievalUnavailable(String),
    #[error("retrieval protocol error: {0}")]
    ProtocolError(String),
}

impl From<crate::http::CallError> for RetrievalError {
    fn from(e: crate::http::CallError) -> Self {
        match e {
            crate::http::CallError::Unavailable(m) => Self::RetrievalUnavailable(m),
            crate::http::CallError::Protocol(m) => Self::ProtocolError(m),
        }
    }
}

/// Anything that can return ranked hits for a query.
#[async_trait]
pub trait Retriever: Send + Sync {
    async fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, RetrievalError>;
}

#[async_trait]
impl Retriever for Index {
    async fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, RetrievalError> {
        Ok(self.search(query, k))
    }
}

#[async_trait]
impl<T: Retriever + ?Sized> Retriever for Arc<T> {
    async fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, RetrievalError> {
        (**self).retrieve(query, k).await
    }
}

impl Index {
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let file_err = |message: String| IndexError::File { path: path.display().to_string(), message };
        let json = serde_json::to_vec(self).map_err(|e| file_err(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| file_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let file_err = |message: String| IndexError::File { path: path.display().to_string(), message };
        let bytes = std::fs::read(path).map_err(|e| file_err(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| file_err(e.to_string()))
    }
}

/// Reads passages from JSON lines. Each line is either a [`Passage`] or a
/// [`LinearizedRecord`].
pub fn read_passages(path: &Path) -> Result<Vec<Passage>, IndexError> {
    let file_err = |line: usize, message: String| IndexError::File {
        path: format!("{}:{line}", path.display()),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| file_err(0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| file_err(i + 1, e.to_string()))?;
        let passage = if value.get("record_id").is_some() {
            let record: LinearizedRecord =
                serde_json::from_value(value).map_err(|e| file_err(i + 1, e.to_string()))?;
            Passage::from(&record)
        } else {
            serde_json::from_value(value).map_err(|e| file_err(i + 1, e.to_string()))?
        };
        out.push(passage);
    }
    Ok(out)
}
