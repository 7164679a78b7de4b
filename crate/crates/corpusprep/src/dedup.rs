//! Exact and near deduplication: content hashing, MinHash signatures over
//! word shingles, and LSH banding for candidate generation.
//!
//! The index is one global structure spanning all sources. Documents are
//! offered in the canonical stream order and the first occurrence of any
//! duplicate cluster wins; a band collision alone never rejects — the
//! signature estimate against the colliding document must also clear the
//! threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rustc_hash::FxHashMap;
use std::collections::HashSet;

use crate::hash::{hash_str, mix64, Hasher64, GOLDEN};
use crate::model::DocId;

/// MinHash/LSH parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct MinHashParams {
    /// Words per shingle.
    pub shingle_size: usize,
    /// Signature length.
    pub num_permutations: usize,
    pub bands: usize,
    pub rows_per_band: usize,
    pub seed: u64,
}

impl Default for MinHashParams {
    fn default() -> Self {
        MinHashParams {
            shingle_size: 5,
            num_permutations: 128,
            bands: 16,
            rows_per_band: 8,
            seed: 0x0DED_0DED,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DedupError {
    #[error("bands ({bands}) x rows_per_band ({rows}) must equal num_permutations ({perms})")]
    BadBanding { bands: usize, rows: usize, perms: usize },
    #[error("shingle_size must be at least 1")]
    BadShingleSize,
    #[error("signatures built with different parameters")]
    ParamMismatch,
}

impl MinHashParams {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.shingle_size < 1 {
            return Err(DedupError::BadShingleSize);
        }
        if self.bands * self.rows_per_band != self.num_permutations {
            return Err(DedupError::BadBanding {
                bands: self.bands,
                rows: self.rows_per_band,
                perms: self.num_permutations,
            });
        }
        Ok(())
    }

    /// Distinguishes signatures produced under different parameters.
    fn fingerprint(&self) -> u64 {
        let mut h = Hasher64::new(0xF17E);
        h.write_u64(self.shingle_size as u64)
            .write_u64(self.num_permutations as u64)
            .write_u64(self.bands as u64)
            .write_u64(self.rows_per_band as u64)
            .write_u64(self.seed);
        h.finish()
    }

    /// Per-permutation seeds, derived from the base seed.
    fn perm_seeds(&self) -> Vec<u64> {
        (0..self.num_permutations)
            .map(|i| mix64(self.seed ^ (i as u64 + 1).wrapping_mul(GOLDEN)))
            .collect()
    }
}

/// Deterministic 64-bit content digest of normalized text.
pub fn content_hash(text: &str, seed: u64) -> u64 {
    hash_str(mix64(seed ^ 0xC047E47), text)
}

/// Fixed-length vector of per-permutation minima over the shingle set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    values: Vec<u64>,
    params_fingerprint: u64,
}

impl MinHashSignature {
    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

/// Hashes of the document's word-shingle set (texts shorter than one
/// shingle use the whole text as a single shingle).
fn shingle_hashes(text: &str, params: &MinHashParams) -> HashSet<u64> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut set = HashSet::new();
    if words.is_empty() {
        set.insert(hash_str(params.seed, text.trim()));
        return set;
    }
    if words.len() < params.shingle_size {
        let mut h = Hasher64::new(params.seed);
        for w in &words {
            h.write_str(w);
        }
        set.insert(h.finish());
        return set;
    }
    for window in words.windows(params.shingle_size) {
        let mut h = Hasher64::new(params.seed);
        for w in window {
            h.write_str(w);
        }
        set.insert(h.finish());
    }
    set
}

/// Computes the MinHash signature of a text under the given parameters.
pub fn minhash_signature(text: &str, params: &MinHashParams) -> MinHashSignature {
    let shingles = shingle_hashes(text, params);
    let seeds = params.perm_seeds();
    let mut values = vec![u64::MAX; params.num_permutations];
    for &base in &shingles {
        for (i, &seed) in seeds.iter().enumerate() {
            let h = mix64(base ^ seed);
            if h < values[i] {
                values[i] = h;
            }
        }
    }
    MinHashSignature {
        values,
        params_fingerprint: params.fingerprint(),
    }
}

/// Fraction of equal signature components — the Jaccard estimate.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.params_fingerprint != b.params_fingerprint || a.values.len() != b.values.len() {
        return Err(DedupError::ParamMismatch);
    }
    let equal = a
        .values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| x == y)
        .count();
    Ok(equal as f64 / a.values.len() as f64)
}

/// Verdict for one document offered to the index.
#[derive(Debug, Clone, PartialEq)]
pub enum DedupDecision {
    Retained,
    ExactDuplicate,
    NearDuplicate {
        /// The earlier retained document it verified against.
        of: DocId,
        estimate: f64,
    },
}

/// Global dedup index: exact digests plus banded signature tables.
///
/// Insert-or-reject decisions must be applied in the canonical global
/// order; the index state is then a pure function of the input sequence.
pub struct DedupIndex {
    params: MinHashParams,
    threshold: f64,
    exact: HashSet<u64>,
    /// Per band: band key -> index of the first-seen signature.
    band_tables: Vec<FxHashMap<u64, u32>>,
    signatures: Vec<(DocId, MinHashSignature)>,
}

impl DedupIndex {
    pub fn new(params: MinHashParams, threshold: f64) -> Result<Self, DedupError> {
        params.validate()?;
        let bands = params.bands;
        Ok(DedupIndex {
            params,
            threshold,
            exact: HashSet::new(),
            band_tables: (0..bands).map(|_| FxHashMap::default()).collect(),
            signatures: Vec::new(),
        })
    }

    pub fn params(&self) -> &MinHashParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    fn band_key(&self, sig: &MinHashSignature, band: usize) -> u64 {
        let rows = self.params.rows_per_band;
        let mut h = Hasher64::new(mix64(0xBA4D ^ band as u64));
        for v in &sig.values[band * rows..(band + 1) * rows] {
            h.write_u64(*v);
        }
        h.finish()
    }

    /// Offers a document (in canonical order). First occurrence is kept
    /// and indexed; exact duplicates are rejected on digest equality; near
    /// duplicates must collide on a band *and* verify by estimate.
    pub fn check_and_insert(&mut self, doc_id: DocId, text: &str) -> DedupDecision {
        let digest = content_hash(text, self.params.seed);
        if self.exact.contains(&digest) {
            return DedupDecision::ExactDuplicate;
        }

        let sig = minhash_signature(text, &self.params);
        let keys: Vec<u64> = (0..self.params.bands)
            .map(|b| self.band_key(&sig, b))
            .collect();

        // Candidates in first-seen order for a deterministic survivor choice.
        let mut candidates: Vec<u32> = keys
            .iter()
            .enumerate()
            .filter_map(|(b, key)| self.band_tables[b].get(key).copied())
            .collect();
        candidates.sort_unstable();
        candidates.dedup();

        for idx in candidates {
            let (cand_id, cand_sig) = &self.signatures[idx as usize];
            let estimate = estimate_jaccard(&sig, cand_sig).expect("same params");
            if estimate >= self.threshold {
                return DedupDecision::NearDuplicate {
                    of: *cand_id,
                    estimate,
                };
            }
        }

        // Retain and index.
        self.exact.insert(digest);
        let slot = self.signatures.len() as u32;
        for (b, key) in keys.into_iter().enumerate() {
            self.band_tables[b].entry(key).or_insert(slot);
        }
        self.signatures.push((doc_id, sig));
        DedupDecision::Retained
    }
}

/// Retained items plus the decision made for every offered document.
pub type StreamOutcome<T> = (Vec<T>, Vec<(DocId, DedupDecision)>);

/// Convenience wrapper: runs a whole in-memory stream through a fresh
/// index, returning the retained items and the per-item decisions.
pub fn dedup_stream<T, F>(
    items: Vec<T>,
    text_of: F,
    params: &MinHashParams,
    threshold: f64,
) -> Result<StreamOutcome<T>, DedupError>
where
    F: Fn(&T) -> (&str, DocId),
{
    let mut index = DedupIndex::new(params.clone(), threshold)?;
    let mut retained = Vec::new();
    let mut decisions = Vec::new();
    for item in items {
        let (text, doc_id) = text_of(&item);
        let decision = index.check_and_insert(doc_id, text);
        decisions.push((doc_id, decision.clone()));
        if decision == DedupDecision::Retained {
            retained.push(item);
        }
    }
    Ok((retained, decisions))
}
