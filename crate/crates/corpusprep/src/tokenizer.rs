//! Byte-level BPE tokenizer: training, encoding, decoding, and the token
//! counting used for all split and cap accounting.
//!
//! The base alphabet is all 256 byte values, so any UTF-8 input encodes
//! without an unknown token and `decode(encode(x)) == x` holds exactly.
//! Word boundaries are marked GPT-2 style: a single space before a word
//! attaches to that word as its initial marker byte, and merges never
//! cross piece boundaries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved special ids.
pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

const NUM_SPECIALS: u32 = 4;
const NUM_BYTES: u32 = 256;
/// Smallest possible vocabulary: specials plus the byte alphabet.
pub const BASE_VOCAB: u32 = NUM_SPECIALS + NUM_BYTES;

const SPECIAL_NAMES: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("vocab_size {requested} is below the minimum {BASE_VOCAB} (specials + byte alphabet)")]
    VocabTooSmall { requested: u32 },
    #[error("corpus too small: ran out of mergeable pairs at vocabulary size {achieved} of {requested}")]
    CorpusTooSmall { achieved: u32, requested: u32 },
    #[error("invalid token id {0}")]
    InvalidId(u32),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(String),
}

/// Splits text into pieces such that concatenating the pieces reproduces
/// the input byte-for-byte. A piece is either a word (a run of
/// non-whitespace, owning at most one directly preceding space as its
/// word-initial marker) or a run of whitespace.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut pieces = Vec::new();
    let mut i = 0;
    let char_is_ws = |b: &str| b.chars().next().is_some_and(char::is_whitespace);

    while i < text.len() {
        let rest = &text[i..];
        let c = rest.chars().next().unwrap();
        if !c.is_whitespace() {
            let end = rest
                .char_indices()
                .find(|(_, c)| c.is_whitespace())
                .map(|(j, _)| i + j)
                .unwrap_or(text.len());
            pieces.push(&text[i..end]);
            i = end;
        } else {
            // Whitespace run; if it ends with a single space followed by a
            // word, that space attaches to the word.
            let end = rest
                .char_indices()
                .find(|(_, c)| !c.is_whitespace())
                .map(|(j, _)| i + j)
                .unwrap_or(text.len());
            let run_ends_with_space = bytes[end - 1] == b' ';
            let word_follows = end < text.len();
            if run_ends_with_space && word_follows {
                if end - 1 > i {
                    pieces.push(&text[i..end - 1]);
                }
                let word_end = text[end..]
                    .char_indices()
                    .find(|(_, c)| c.is_whitespace())
                    .map(|(j, _)| end + j)
                    .unwrap_or(text.len());
                pieces.push(&text[end - 1..word_end]);
                i = word_end;
            } else {
                pieces.push(&text[i..end]);
                i = end;
            }
        }
    }
    debug_assert!(char_is_ws(" "));
    pieces
}

/// Trained BPE model: ordered merges plus the dense id table.
#[derive(Debug, Clone)]
pub struct BpeModel {
    /// id -> byte sequence (specials hold their literal names).
    vocab: Vec<Vec<u8>>,
    /// Ordered list of (left, right) token-id pairs; position i produced
    /// token id BASE_VOCAB + i.
    merges: Vec<(u32, u32)>,
    /// (left, right) -> merged id, for encoding.
    merge_table: FxHashMap<(u32, u32), u32>,
}

impl BpeModel {
    pub fn vocab_size(&self) -> u32 {
        self.vocab.len() as u32
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.vocab.get(id as usize).map(|v| v.as_slice())
    }

    fn from_merges(merges: Vec<(u32, u32)>) -> Result<BpeModel, TokenizerError> {
        let mut vocab: Vec<Vec<u8>> = Vec::with_capacity(BASE_VOCAB as usize + merges.len());
        for name in SPECIAL_NAMES {
            vocab.push(name.as_bytes().to_vec());
        }
        for b in 0..=255u8 {
            vocab.push(vec![b]);
        }
        let mut merge_table = FxHashMap::default();
        for (i, &(l, r)) in merges.iter().enumerate() {
            let id = BASE_VOCAB + i as u32;
            if l >= id || r >= id || l < NUM_SPECIALS || r < NUM_SPECIALS {
                return Err(TokenizerError::Malformed(format!(
                    "merge {i} references invalid ids ({l}, {r})"
                )));
            }
            let mut bytes = vocab[l as usize].clone();
            bytes.extend_from_slice(&vocab[r as usize]);
            vocab.push(bytes);
            merge_table.insert((l, r), id);
        }
        Ok(BpeModel {
            vocab,
            merges,
            merge_table,
        })
    }

    /// Applies merges to one piece by repeatedly merging the
    /// earliest-trained applicable pair.
    fn encode_piece(&self, piece: &str, out: &mut Vec<u32>) {
        let mut syms: Vec<u32> = piece.bytes().map(|b| NUM_SPECIALS + b as u32).collect();
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..syms.len().saturating_sub(1) {
                if let Some(&id) = self.merge_table.get(&(syms[i], syms[i + 1])) {
                    if best.is_none_or(|(b, _)| id < b) {
                        best = Some((id, i));
                    }
                }
            }
            let Some((id, _)) = best else { break };
            let (l, r) = self.merges[(id - BASE_VOCAB) as usize];
            let mut merged = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    merged.push(id);
                    i += 2;
                } else {
                    merged.push(syms[i]);
                    i += 1;
                }
            }
            syms = merged;
        }
        out.extend_from_slice(&syms);
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for piece in pretokenize(text) {
            self.encode_piece(piece, &mut out);
        }
        out
    }

    /// Inverse of `encode` for any id sequence the model produced;
    /// arbitrary valid ids decode to their byte sequences.
    pub fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        let mut bytes = Vec::new();
        for &id in ids {
            let tok = self
                .token_bytes(id)
                .ok_or(TokenizerError::InvalidId(id))?;
            bytes.extend_from_slice(tok);
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn count_tokens(&self, text: &str) -> u64 {
        self.encode(text).len() as u64
    }

    // -- persistence ----------------------------------------------------------

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        let mut vocab_map = serde_json::Map::new();
        for (id, bytes) in self.vocab.iter().enumerate() {
            let key = if id < NUM_SPECIALS as usize {
                SPECIAL_NAMES[id].to_string()
            } else {
                hex(bytes)
            };
            vocab_map.insert(key, serde_json::json!(id));
        }
        let file = ModelFile {
            version: 1,
            alphabet: "bytes-256".into(),
            specials: SPECIAL_NAMES
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), i as u32))
                .collect(),
            merges: self.merges.clone(),
            vocab: serde_json::Value::Object(vocab_map),
        };
        let json = serde_json::to_string(&file).expect("model serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<BpeModel, TokenizerError> {
        let body = std::fs::read_to_string(path)?;
        let file: ModelFile =
            serde_json::from_str(&body).map_err(|e| TokenizerError::Malformed(e.to_string()))?;
        if file.version != 1 {
            return Err(TokenizerError::Malformed(format!(
                "unsupported version {}",
                file.version
            )));
        }
        if file.alphabet != "bytes-256" {
            return Err(TokenizerError::Malformed(format!(
                "unsupported alphabet {:?}",
                file.alphabet
            )));
        }
        let model = BpeModel::from_merges(file.merges)?;
        let vocab_entries = file
            .vocab
            .as_object()
            .map(|m| m.len() as u32)
            .unwrap_or(0);
        if vocab_entries != model.vocab_size() {
            return Err(TokenizerError::Malformed(format!(
                "vocab map has {} entries, merges imply {}",
                vocab_entries,
                model.vocab_size()
            )));
        }
        Ok(model)
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    alphabet: String,
    specials: std::collections::BTreeMap<String, u32>,
    merges: Vec<(u32, u32)>,
    vocab: serde_json::Value,
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct HeapEntry {
    count: u64,
    /// Byte sequences of the pair, for the lexicographic tiebreak.
    left: Vec<u8>,
    right: Vec<u8>,
    pair: (u32, u32),
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: higher count first; ties broken by lexicographically
        // smaller (left, right) byte pair.
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

struct TrainerWord {
    syms: Vec<u32>,
    freq: u64,
}

/// Greedy BPE training over a stream of texts.
///
/// Merges the most frequent adjacent pair (counting overlapping
/// positions) until `vocab_size` is reached; equal-frequency ties go to
/// the lexicographically smaller pair, which pins the merge order on any
/// platform.
pub fn train_bpe<I, S>(texts: I, vocab_size: u32) -> Result<BpeModel, TokenizerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if vocab_size < BASE_VOCAB {
        return Err(TokenizerError::VocabTooSmall {
            requested: vocab_size,
        });
    }

    // Pretoken frequency dictionary.
    let mut counts: FxHashMap<Box<str>, u64> = FxHashMap::default();
    for text in texts {
        for piece in pretokenize(text.as_ref()) {
            match counts.get_mut(piece) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(Box::from(piece), 1);
                }
            }
        }
    }

    // Deterministic word order (the algorithm is order-insensitive, but a
    // sorted dictionary keeps every intermediate structure reproducible).
    let mut dict: Vec<(Box<str>, u64)> = counts.into_iter().collect();
    dict.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let mut words: Vec<TrainerWord> = dict
        .into_iter()
        .map(|(piece, freq)| TrainerWord {
            syms: piece.bytes().map(|b| NUM_SPECIALS + b as u32).collect(),
            freq,
        })
        .collect();

    let mut vocab: Vec<Vec<u8>> = Vec::with_capacity(vocab_size as usize);
    for name in SPECIAL_NAMES {
        vocab.push(name.as_bytes().to_vec());
    }
    for b in 0..=255u8 {
        vocab.push(vec![b]);
    }

    let mut pair_counts: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    let mut pair_words: FxHashMap<(u32, u32), FxHashSet<u32>> = FxHashMap::default();
    for (wi, word) in words.iter().enumerate() {
        for pair in adjacent_pairs(&word.syms) {
            *pair_counts.entry(pair).or_insert(0) += word.freq;
            pair_words.entry(pair).or_default().insert(wi as u32);
        }
    }

    let mut heap = BinaryHeap::new();
    for (&pair, &count) in &pair_counts {
        heap.push(HeapEntry {
            count,
            left: vocab[pair.0 as usize].clone(),
            right: vocab[pair.1 as usize].clone(),
            pair,
        });
    }

    let mut merges: Vec<(u32, u32)> = Vec::new();
    while (vocab.len() as u32) < vocab_size {
        // Pop until a live entry surfaces (stale counts are skipped).
        let pair = loop {
            let Some(entry) = heap.pop() else {
                return Err(TokenizerError::CorpusTooSmall {
                    achieved: vocab.len() as u32,
                    requested: vocab_size,
                });
            };
            if entry.count == 0 {
                return Err(TokenizerError::CorpusTooSmall {
                    achieved: vocab.len() as u32,
                    requested: vocab_size,
                });
            }
            if pair_counts.get(&entry.pair).copied().unwrap_or(0) == entry.count {
                break entry.pair;
            }
        };

        let new_id = vocab.len() as u32;
        let mut bytes = vocab[pair.0 as usize].clone();
        bytes.extend_from_slice(&vocab[pair.1 as usize]);
        vocab.push(bytes);
        merges.push(pair);

        let mut touched: Vec<u32> = pair_words
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        touched.sort_unstable();

        for wi in touched {
            let word = &mut words[wi as usize];
            if !contains_pair(&word.syms, pair) {
                continue; // stale membership from an earlier rewrite
            }
            let before = pair_multiset(&word.syms);
            let new_syms = apply_merge(&word.syms, pair, new_id);
            let after = pair_multiset(&new_syms);
            word.syms = new_syms;
            let freq = word.freq;

            for (&p, &n_before) in &before {
                let n_after = after.get(&p).copied().unwrap_or(0);
                if n_before > n_after {
                    let c = pair_counts.entry(p).or_insert(0);
                    *c -= (n_before - n_after) * freq;
                    let c = *c;
                    push_count(&mut heap, &vocab, p, c);
                }
            }
            for (&p, &n_after) in &after {
                let n_before = before.get(&p).copied().unwrap_or(0);
                if n_after > n_before {
                    let c = pair_counts.entry(p).or_insert(0);
                    *c += (n_after - n_before) * freq;
                    pair_words.entry(p).or_default().insert(wi);
                    let c = *c;
                    push_count(&mut heap, &vocab, p, c);
                }
            }
        }
        pair_counts.remove(&pair);
    }

    BpeModel::from_merges(merges)
}

fn push_count(heap: &mut BinaryHeap<HeapEntry>, vocab: &[Vec<u8>], pair: (u32, u32), count: u64) {
    if count > 0 {
        heap.push(HeapEntry {
            count,
            left: vocab[pair.0 as usize].clone(),
            right: vocab[pair.1 as usize].clone(),
            pair,
        });
    }
}

fn adjacent_pairs(syms: &[u32]) -> impl Iterator<Item = (u32, u32)> + '_ {
    syms.windows(2).map(|w| (w[0], w[1]))
}

fn contains_pair(syms: &[u32], pair: (u32, u32)) -> bool {
    adjacent_pairs(syms).any(|p| p == pair)
}

fn pair_multiset(syms: &[u32]) -> FxHashMap<(u32, u32), u64> {
    let mut m = FxHashMap::default();
    for p in adjacent_pairs(syms) {
        *m.entry(p).or_insert(0) += 1;
    }
    m
}

/// Replaces occurrences of `pair` left to right with `new_id`.
fn apply_merge(syms: &[u32], pair: (u32, u32), new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
        } else {
            out.push(syms[i]);
            i += 1;
        }
    }
    out
}

/// Encoder with a pretoken cache for counting-heavy call sites.
pub struct Encoder<'a> {
    model: &'a BpeModel,
    cache: FxHashMap<Box<str>, Vec<u32>>,
}

impl<'a> Encoder<'a> {
    pub fn new(model: &'a BpeModel) -> Self {
        Encoder {
            model,
            cache: FxHashMap::default(),
        }
    }

    pub fn model(&self) -> &BpeModel {
        self.model
    }

    pub fn encode(&mut self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for piece in pretokenize(text) {
            if let Some(ids) = self.cache.get(piece) {
                out.extend_from_slice(ids);
                continue;
            }
            let mut ids = Vec::new();
            self.model.encode_piece(piece, &mut ids);
            out.extend_from_slice(&ids);
            self.cache.insert(Box::from(piece), ids);
        }
        out
    }

    pub fn count(&mut self, text: &str) -> u64 {
        let mut total = 0u64;
        for piece in pretokenize(text) {
            if let Some(ids) = self.cache.get(piece) {
                total += ids.len() as u64;
                continue;
            }
            let mut ids = Vec::new();
            self.model.encode_piece(piece, &mut ids);
            total += ids.len() as u64;
            self.cache.insert(Box::from(piece), ids);
        }
        total
    }
}
