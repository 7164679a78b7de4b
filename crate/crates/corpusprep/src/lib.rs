//! Streaming corpus preparation for the eleven official South African
//! languages: manifest-driven ingestion, language identification,
//! cleaning, exact and near deduplication, BPE tokenization, packing,
//! deterministic splits, and the accounting reports that audit every
//! stage.
//!
//! Everything downstream of the raw inputs is a pure function of
//! `(inputs, config, seed)`: two runs over the same data produce
//! byte-identical shards and reports.

pub mod assembly;
pub mod clean;
pub mod config;
pub mod dedup;
pub mod fixture;
pub mod hash;
pub mod ingest;
pub mod langid;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod tokenizer;
