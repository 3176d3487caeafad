//! Photo vectors, nearest-ideophone retrieval and jittered selection.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    cosine_distance_unchecked, weighted_vector, EmbeddingError, EmbeddingTable, SemanticVector,
    WeightedLabel,
};
use crate::lexicon::IdeophoneIndex;
use crate::perception::{Classifier, DetectionSet};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("unmatchable photo: no detection label has an in-vocabulary token")]
    Unmatchable,
    #[error("query dimension {query} does not match index dimension {index}")]
    DimensionMismatch { index: usize, query: usize },
    #[error("query vector is degenerate (no in-vocabulary tokens)")]
    DegenerateQuery,
    #[error("k must be at least 1")]
    InvalidK,
}

/// A retrieved index entry and its cosine distance to the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub entry_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub entry_id: String,
    pub distance: f64,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub selected: MatchCandidate,
    /// Pooled candidates, ascending by distance.
    pub pool: Vec<MatchCandidate>,
    pub seed: u64,
}

/// One confidence-weighted vector per classifier group. Groups whose vector
/// is degenerate are dropped.
pub fn photo_vectors(
    ds: &DetectionSet,
    table: &EmbeddingTable,
) -> Result<BTreeMap<Classifier, SemanticVector>, MatchError> {
    let mut out = BTreeMap::new();
    for (classifier, detections) in ds.groups() {
        let items: Vec<WeightedLabel> = detections
            .iter()
            .map(|d| WeightedLabel::new(d.tokens(), d.confidence))
            .collect();
        let v = weighted_vector(&items, table)?;
        if v.is_degenerate() {
            log::warn!(
                "{}: dropping {classifier} group, no label is in vocabulary",
                ds.photo_id()
            );
            continue;
        }
        out.insert(classifier.clone(), v);
    }
    if out.is_empty() {
        return Err(MatchError::Unmatchable);
    }
    Ok(out)
}

fn by_distance_then_id(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.entry_id.cmp(&b.entry_id))
}

/// The `k` index entries closest to `query` by cosine distance, ascending,
/// ties broken by entry id. Exhaustive scan.
pub fn top_k(
    index: &IdeophoneIndex,
    query: &SemanticVector,
    k: usize,
) -> Result<Vec<Neighbor>, MatchError> {
    if k == 0 {
        return Err(MatchError::InvalidK);
    }
    if query.dimension() != index.dimension() {
        return Err(MatchError::DimensionMismatch {
            index: index.dimension(),
            query: query.dimension(),
        });
    }
    if query.is_degenerate() {
        return Err(MatchError::DegenerateQuery);
    }
    let mut all: Vec<Neighbor> = index
        .entries()
        .iter()
        .map(|e| Neighbor {
            entry_id: e.entry.id.clone(),
            distance: cosine_distance_unchecked(query.components(), e.vector.components()),
        })
        .collect();
    let k = k.min(all.len());
    if k > 0 && k < all.len() {
        all.select_nth_unstable_by(k - 1, by_distance_then_id);
        all.truncate(k);
    }
    all.sort_by(by_distance_then_id);
    Ok(all)
}

fn pool_order(a: &MatchCandidate, b: &MatchCandidate) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.classifier.cmp(&b.classifier))
        .then_with(|| a.entry_id.cmp(&b.entry_id))
}

/// Index into the first `k` pool positions chosen for `seed`. Seed 0 means
/// no jitter.
pub fn jitter_pick(pool_len: usize, k: usize, seed: u64) -> usize {
    let window = k.min(pool_len);
    if seed == 0 || window <= 1 {
        return 0;
    }
    ChaCha8Rng::seed_from_u64(seed).gen_range(0..window)
}

/// Retrieves the top `k` ideophones for every classifier group, pools them
/// (keeping each entry's best distance), and picks one of the `k` closest
/// pooled candidates uniformly at random for `seed`.
pub fn recommend(
    index: &IdeophoneIndex,
    ds: &DetectionSet,
    table: &EmbeddingTable,
    k: usize,
    seed: u64,
) -> Result<Recommendation, MatchError> {
    if k == 0 {
        return Err(MatchError::InvalidK);
    }
    let vectors = photo_vectors(ds, table)?;
    let mut best: BTreeMap<String, MatchCandidate> = BTreeMap::new();
    for (classifier, v) in &vectors {
        for n in top_k(index, v, k)? {
            let candidate = MatchCandidate {
                entry_id: n.entry_id,
                distance: n.distance,
                classifier: classifier.clone(),
            };
            match best.entry(candidate.entry_id.clone()) {
                Entry::Vacant(slot) => {
                    slot.insert(candidate);
                }
                Entry::Occupied(mut slot) => {
                    if pool_order(&candidate, slot.get()) == Ordering::Less {
                        slot.insert(candidate);
                    }
                }
            }
        }
    }
    let mut pool: Vec<MatchCandidate> = best.into_values().collect();
    if pool.is_empty() {
        return Err(MatchError::Unmatchable);
    }
    pool.sort_by(pool_order);
    let selected = pool[jitter_pick(pool.len(), k, seed)].clone();
    Ok(Recommendation {
        selected,
        pool,
        seed,
    })
}
