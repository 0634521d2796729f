use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Hit, IndexError, Passage, PassageKind};

/// BM25 term-frequency saturation.
pub const K1: f64 = 1.2;
/// BM25 length normalization.
pub const B: f64 = 0.75;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from", "has",
    "have", "how", "in", "is", "it", "its", "of", "on", "or", "s", "that", "the", "this", "to",
    "was", "were", "what", "when", "where", "which", "who", "whom", "why", "will", "with",
];

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Tokens that take part in scoring: [`tokenize`] minus stopwords.
pub fn index_terms(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Doc {
    passage: Passage,
    len: u32,
}

/// Write-once inverted index with BM25 statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    docs: Vec<Doc>,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    avg_len: f64,
}

impl Index {
    /// Builds the index, rejecting duplicate ids and empty passages.
    pub fn build(passages: impl IntoIterator<Item = Passage>) -> Result<Self, IndexError> {
        let mut docs = Vec::new();
        let mut seen = HashSet::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut total_len = 0u64;

        for passage in passages {
            if !seen.insert(passage.doc_id.clone()) {
                return Err(IndexError::DuplicateDocId(passage.doc_id));
            }
            if passage.text.trim().is_empty() {
                return Err(IndexError::EmptyPassage(passage.doc_id));
            }
            let doc_index = u32::try_from(docs.len()).map_err(|_| IndexError::TooLarge)?;
            let terms = index_terms(&passage.text);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for term in &terms {
                *tf.entry(term.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((doc_index, count));
            }
            total_len += terms.len() as u64;
            docs.push(Doc { passage, len: terms.len() as u32 });
        }
        let avg_len = if docs.is_empty() { 0.0 } else { total_len as f64 / docs.len() as f64 };
        Ok(Self { docs, postings, avg_len })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn passages(&self) -> impl Iterator<Item = &Passage> {
        self.docs.iter().map(|d| &d.passage)
    }

    pub fn get(&self, doc_id: &str) -> Option<&Passage> {
        self.passages().find(|p| p.doc_id == doc_id)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top `k` documents sharing at least one non-stopword term with the
    /// query, ordered by score descending then doc id ascending.
    pub fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        let mut terms = index_terms(query);
        terms.sort();
        terms.dedup();

        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(list.len());
            for &(doc, tf) in list {
                let tf = tf as f64;
                let len_norm = 1.0 - B + B * self.docs[doc as usize].len as f64 / self.avg_len;
                *scores.entry(doc).or_default() += idf * tf * (K1 + 1.0) / (tf + K1 * len_norm);
            }
        }

        let mut hits: Vec<Hit> = scores
            .into_iter()
            .map(|(doc, score)| {
                let p = &self.docs[doc as usize].passage;
                Hit { doc_id: p.doc_id.clone(), title: p.title.clone(), score, kind: p.kind, text: p.text.clone() }
            })
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }

    pub fn kinds(&self) -> HashSet<PassageKind> {
        self.passages().map(|p| p.kind).collect()
    }
}

/// Sorts by score descending, ties broken by doc id ascending.
pub fn sort_hits(hits: &mut [Hit]) {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
}
