use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default number of negatives sampled per positive.
pub const DEFAULT_NEGATIVES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriplet {
    pub query: String,
    pub positive_id: String,
    pub negative_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TripletError {
    #[error("pool has {available} distinct documents but {needed} are needed ({n_neg} negatives plus the positive)")]
    PoolTooSmall { needed: usize, available: usize, n_neg: usize },
    #[error("positive {0:?} is not in the document pool")]
    PositiveNotInPool(String),
    #[error("triplet file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Samples `n_neg` distinct negatives per positive, uniformly from the pool
/// minus the positive. Output order follows `positives`; the same seed always
/// yields the same triplets.
pub fn generate_triplets(
    positives: &[(String, String)],
    pool: &[String],
    n_neg: usize,
    seed: u64,
) -> Result<Vec<TrainingTriplet>, TripletError> {
    let mut seen = HashSet::new();
    let pool: Vec<&str> = pool.iter().map(String::as_str).filter(|id| seen.insert(*id)).collect();
    if pool.len() <= n_neg {
        return Err(TripletError::PoolTooSmall { needed: n_neg + 1, available: pool.len(), n_neg });
    }
    let position: std::collections::HashMap<&str, usize> =
        pool.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(positives.len() * n_neg);
    for (query, positive) in positives {
        let &skip = position
            .get(positive.as_str())
            .ok_or_else(|| TripletError::PositiveNotInPool(positive.clone()))?;
        // Sample from the pool with the positive removed, then shift indices
        // past the gap.
        for drawn in sample(&mut rng, pool.len() - 1, n_neg).into_iter() {
            let index = if drawn >= skip { drawn + 1 } else { drawn };
            triplets.push(TrainingTriplet {
                query: query.clone(),
                positive_id: positive.clone(),
                negative_id: pool[index].to_string(),
            });
        }
    }
    Ok(triplets)
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Writes `query \t positive_id \t negative_id` lines. Tabs and newlines
/// inside fields become spaces.
pub fn write_triplets_tsv<W: Write>(mut out: W, triplets: &[TrainingTriplet]) -> std::io::Result<()> {
    for t in triplets {
        writeln!(out, "{}\t{}\t{}", tsv_field(&t.query), tsv_field(&t.positive_id), tsv_field(&t.negative_id))?;
    }
    out.flush()
}

pub fn read_triplets_tsv<R: BufRead>(input: R) -> Result<Vec<TrainingTriplet>, TripletError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [query, positive_id, negative_id] = fields.as_slice() else {
            return Err(TripletError::Parse { line: i + 1, message: format!("expected 3 fields, got {}", fields.len()) });
        };
        out.push(TrainingTriplet {
            query: query.to_string(),
            positive_id: positive_id.to_string(),
            negative_id: negative_id.to_string(),
        });
    }
    Ok(out)
}
