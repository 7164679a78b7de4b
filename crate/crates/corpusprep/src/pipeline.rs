//! End-to-end orchestration: the canonical stage order, per-stage shard
//! IO, resumable checkpoints, and the report verifier that recomputes
//! every published number from the persisted artifacts.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assign_split, enforce_caps, pack_records, rebalance_mixture, split_sentences, DocFragments,
    Split, TrainingRecord,
};
use crate::clean::{normalize, quality_check, scrub_pii, structural_check, FunctionWords};
use crate::config::{ConfigError, RunConfig};
use crate::dedup::{DedupDecision, DedupIndex};
use crate::hash::mix64;
use crate::ingest::{
    load_manifest, read_shard_file, read_shard_manifest, read_shard_rows, shard_files,
    IngestError, RunManifest, ShardWriter,
};
use crate::langid::{LangIdModel, SegmentOutcome};
use crate::model::{
    count_words, CleanDocument, DocAccounting, Lang, RawDocument, RejectReason, RejectionRecord,
    SourceId, Stage,
};
use crate::report::{
    accumulate, rejection_histogram, render, split_distribution, ReportFormat, RejectionCount,
    RunReport,
};
use crate::tokenizer::{train_bpe, BpeModel, Encoder, TokenizerError};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PipeStage {
    Ingest,
    LangId,
    Clean,
    Dedup,
    Filter,
    Tok,
    Assemble,
    Report,
}

impl PipeStage {
    pub const ALL: [PipeStage; 8] = [
        PipeStage::Ingest,
        PipeStage::LangId,
        PipeStage::Clean,
        PipeStage::Dedup,
        PipeStage::Filter,
        PipeStage::Tok,
        PipeStage::Assemble,
        PipeStage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipeStage::Ingest => "ingest",
            PipeStage::LangId => "langid",
            PipeStage::Clean => "clean",
            PipeStage::Dedup => "dedup",
            PipeStage::Filter => "filter",
            PipeStage::Tok => "tok",
            PipeStage::Assemble => "assemble",
            PipeStage::Report => "report",
        }
    }

    pub fn parse(name: &str) -> Option<PipeStage> {
        PipeStage::ALL.iter().copied().find(|s| s.name() == name)
    }

    fn predecessor(self) -> Option<PipeStage> {
        let idx = PipeStage::ALL.iter().position(|s| *s == self).unwrap();
        idx.checked_sub(1).map(|i| PipeStage::ALL[i])
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("manifest: {0}")]
    Manifest(#[from] IngestError),
    #[error("stage {stage}: missing input; run stage {expected} first")]
    MissingInput {
        stage: &'static str,
        expected: &'static str,
    },
    #[error("checkpoint was written by a different configuration ({found}, current {current}); rerun with --force to rebuild")]
    StaleCheckpoint { found: String, current: String },
    #[error("stage {stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl PipelineError {
    /// The stage this error belongs to, for exit-status reporting.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            PipelineError::Stage { stage, .. } => Some(stage),
            PipelineError::MissingInput { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Checkpoint {
    config_digest: String,
    completed: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SourceSummary {
    name: SourceId,
    files: u64,
    records: u64,
    malformed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IngestSummary {
    sources: Vec<SourceSummary>,
    total_records: u64,
}

/// A configured pipeline bound to one output directory.
pub struct Pipeline {
    cfg: RunConfig,
    manifest: RunManifest,
    out: PathBuf,
    seed: u64,
    digest: String,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Pipeline, PipelineError> {
        cfg.validate()?;
        let manifest = load_manifest(&cfg.manifest)?;
        let out = cfg
            .output_dir
            .clone()
            .unwrap_or_else(|| manifest.output_dir.clone());
        let seed = cfg.seed.unwrap_or(manifest.seed);
        // Digest over the effective configuration; the output location
        // itself does not influence produced bytes.
        let mut effective = cfg.clone();
        effective.seed = Some(seed);
        effective.output_dir = None;
        let digest = effective.digest();
        Ok(Pipeline {
            cfg,
            manifest,
            out,
            seed,
            digest,
        })
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn config_digest(&self) -> &str {
        &self.digest
    }

    fn stage_dir(&self, stage: PipeStage) -> PathBuf {
        self.out.join("stages").join(stage.name())
    }

    fn split_seed(&self) -> u64 {
        mix64(self.seed ^ 0x0001_5917)
    }

    fn rebalance_seed(&self) -> u64 {
        mix64(self.seed ^ 0x0002_4EBA)
    }

    // -- checkpointing --------------------------------------------------------

    fn checkpoint_path(&self) -> PathBuf {
        self.out.join("checkpoint.json")
    }

    fn load_checkpoint(&self) -> Checkpoint {
        fs::read_to_string(self.checkpoint_path())
            .ok()
            .and_then(|body| serde_json::from_str(&body).ok())
            .unwrap_or_default()
    }

    fn save_checkpoint(&self, checkpoint: &Checkpoint) -> std::io::Result<()> {
        fs::create_dir_all(&self.out)?;
        let tmp = self.checkpoint_path().with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(checkpoint).expect("serializes"))?;
        fs::rename(&tmp, self.checkpoint_path())?;
        Ok(())
    }

    fn mark_complete(&self, stage: PipeStage) -> std::io::Result<()> {
        let mut cp = self.load_checkpoint();
        cp.config_digest = self.digest.clone();
        if !cp.completed.iter().any(|s| s == stage.name()) {
            cp.completed.push(stage.name().to_string());
        }
        self.save_checkpoint(&cp)
    }

    fn is_complete(&self, checkpoint: &Checkpoint, stage: PipeStage) -> bool {
        checkpoint.config_digest == self.digest
            && checkpoint.completed.iter().any(|s| s == stage.name())
    }

    // -- public entry points ----------------------------------------------------

    /// Runs every stage up to and including `upto` (default: all),
    /// skipping stages already completed under the same configuration.
    pub fn run(&self, force: bool, upto: Option<PipeStage>) -> Result<Option<RunReport>, PipelineError> {
        fs::create_dir_all(&self.out)?;
        let checkpoint = self.load_checkpoint();
        if !checkpoint.completed.is_empty() && checkpoint.config_digest != self.digest {
            if force {
                log::warn!("configuration changed; rebuilding all stages");
                let _ = fs::remove_file(self.checkpoint_path());
            } else {
                return Err(PipelineError::StaleCheckpoint {
                    found: checkpoint.config_digest,
                    current: self.digest.clone(),
                });
            }
        }
        let checkpoint = self.load_checkpoint();
        let last = upto.unwrap_or(PipeStage::Report);
        let mut report = None;
        for stage in PipeStage::ALL {
            if stage > last {
                break;
            }
            if !force && self.is_complete(&checkpoint, stage) {
                log::info!("stage {} already complete, skipping", stage.name());
                continue;
            }
            log::info!("running stage {}", stage.name());
            report = self.execute(stage)?;
            self.mark_complete(stage)?;
        }
        Ok(report)
    }

    /// Runs one stage, requiring its predecessor to be complete.
    pub fn run_stage(&self, stage: PipeStage, force: bool) -> Result<Option<RunReport>, PipelineError> {
        let checkpoint = self.load_checkpoint();
        if let Some(pred) = stage.predecessor() {
            if !self.is_complete(&checkpoint, pred) {
                return Err(PipelineError::MissingInput {
                    stage: stage.name(),
                    expected: pred.name(),
                });
            }
        }
        if !force && self.is_complete(&checkpoint, stage) {
            log::info!("stage {} already complete, skipping", stage.name());
            return Ok(None);
        }
        let report = self.execute(stage)?;
        self.mark_complete(stage)?;
        Ok(report)
    }

    fn execute(&self, stage: PipeStage) -> Result<Option<RunReport>, PipelineError> {
        match stage {
            PipeStage::Ingest => self.stage_ingest().map(|_| None),
            PipeStage::LangId => self.stage_langid().map(|_| None),
            PipeStage::Clean => self.stage_clean().map(|_| None),
            PipeStage::Dedup => self.stage_dedup().map(|_| None),
            PipeStage::Filter => self.stage_filter().map(|_| None),
            PipeStage::Tok => self.stage_tok().map(|_| None),
            PipeStage::Assemble => self.stage_assemble().map(|_| None),
            PipeStage::Report => self.stage_report().map(Some),
        }
    }

    fn stage_err(stage: PipeStage, message: impl std::fmt::Display) -> PipelineError {
        PipelineError::Stage {
            stage: stage.name(),
            message: message.to_string(),
        }
    }

    fn read_stage_docs(&self, stage: PipeStage, caller: PipeStage) -> Result<Vec<CleanDocument>, PipelineError> {
        let dir = self.stage_dir(stage);
        let manifest = read_shard_manifest(&dir, "docs").map_err(|_| PipelineError::MissingInput {
            stage: caller.name(),
            expected: stage.name(),
        })?;
        read_shard_rows(&dir, &manifest).map_err(PipelineError::Io)
    }

    // -- stages --------------------------------------------------------------

    fn stage_ingest(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::Ingest;
        let dir = self.stage_dir(stage);
        let mut writer = ShardWriter::new(&dir, "docs", self.cfg.shard_records)?;
        let mut seen = HashSet::new();
        let mut summary = IngestSummary {
            sources: Vec::new(),
            total_records: 0,
        };
        for spec in &self.manifest.sources {
            let files = shard_files(spec)?;
            let mut source_summary = SourceSummary {
                name: spec.name.clone(),
                files: files.len() as u64,
                records: 0,
                malformed: 0,
            };
            for (shard_index, file) in files.iter().enumerate() {
                let read = read_shard_file(spec, file, shard_index as u64)?;
                source_summary.malformed += read.malformed;
                for doc in read.documents {
                    if !seen.insert(doc.doc_id.0) {
                        return Err(Self::stage_err(
                            stage,
                            format!("doc id collision on {} in source {}", doc.doc_id, spec.name),
                        ));
                    }
                    writer.push(&doc)?;
                    source_summary.records += 1;
                }
            }
            summary.total_records += source_summary.records;
            summary.sources.push(source_summary);
        }
        writer.finish_and_write_manifest()?;
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary).expect("serializes"),
        )?;
        Ok(())
    }

    fn langid_model(&self) -> Result<LangIdModel, PipelineError> {
        let stage = PipeStage::LangId;
        if let Some(path) = &self.cfg.langid.model {
            return LangIdModel::load(path).map_err(|e| Self::stage_err(stage, e));
        }
        let Some(seed_dir) = &self.cfg.langid.seed_dir else {
            return Err(Self::stage_err(
                stage,
                "langid needs either a model path or a seed_dir with per-language text",
            ));
        };
        let mut samples: Vec<(Lang, String)> = Vec::new();
        for lang in Lang::ALL {
            let path = seed_dir.join(format!("{}.txt", lang.iso_code()));
            if let Ok(body) = fs::read_to_string(&path) {
                for line in body.lines() {
                    let line = line.trim();
                    if !line.is_empty() {
                        samples.push((lang, line.to_string()));
                    }
                }
            }
        }
        LangIdModel::train(samples, self.cfg.langid.config.clone())
            .map_err(|e| Self::stage_err(stage, e))
    }

    fn stage_langid(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::LangId;
        let in_dir = self.stage_dir(PipeStage::Ingest);
        let manifest = read_shard_manifest(&in_dir, "docs").map_err(|_| PipelineError::MissingInput {
            stage: stage.name(),
            expected: PipeStage::Ingest.name(),
        })?;

        let model = self.langid_model()?;
        let dir = self.stage_dir(stage);
        fs::create_dir_all(&dir)?;
        model
            .save(&dir.join("model.lidm"))
            .map_err(|e| Self::stage_err(stage, e))?;

        let mut docs_out = ShardWriter::new(&dir, "docs", self.cfg.shard_records)?;
        let mut rej_out = ShardWriter::new(&dir, "rejections", self.cfg.shard_records)?;

        // Shard-by-shard keeps memory bounded; rayon map preserves order.
        for shard in &manifest.shards {
            let rows: Vec<RawDocument> = read_shard_rows(
                &in_dir,
                &crate::ingest::ShardManifest {
                    shards: vec![shard.clone()],
                    total_records: shard.records,
                },
            )?;
            let outcomes: Vec<Result<CleanDocument, RejectionRecord>> = rows
                .into_par_iter()
                .map(|doc| {
                    let normalized = normalize(&doc.text);
                    let entry = count_words(&normalized);
                    let reject = |_: &RawDocument| RejectionRecord {
                        doc_id: doc.doc_id,
                        source: doc.source.clone(),
                        stage: Stage::LangId,
                        reason: RejectReason::WrongLanguage,
                        lang: None,
                        word_count: entry,
                        entry_word_count: entry,
                    };
                    if normalized.trim().is_empty() {
                        return Err(reject(&doc));
                    }
                    match model.segment_and_filter(&normalized) {
                        SegmentOutcome::Retained {
                            text,
                            lang,
                            confidence,
                        } => Ok(CleanDocument {
                            doc_id: doc.doc_id,
                            source: doc.source.clone(),
                            lang,
                            lang_confidence: confidence,
                            word_count: count_words(&text),
                            entry_word_count: entry,
                            text,
                            stage_history: vec![Stage::LangId],
                            redaction_count: 0,
                        }),
                        SegmentOutcome::Rejected => Err(reject(&doc)),
                    }
                })
                .collect();
            for outcome in outcomes {
                match outcome {
                    Ok(doc) => docs_out.push(&doc)?,
                    Err(rejection) => rej_out.push(&rejection)?,
                }
            }
        }
        docs_out.finish_and_write_manifest()?;
        rej_out.finish_and_write_manifest()?;
        Ok(())
    }

    fn stage_clean(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::Clean;
        let docs = self.read_stage_docs(PipeStage::LangId, stage)?;
        let dir = self.stage_dir(stage);
        let mut docs_out = ShardWriter::new(&dir, "docs", self.cfg.shard_records)?;
        let mut rej_out = ShardWriter::new(&dir, "rejections", self.cfg.shard_records)?;

        for mut doc in docs {
            // Line filtering can leave collapsed joins behind; normalize is
            // idempotent so this only tidies those.
            doc.text = normalize(&doc.text);
            doc.recount();
            doc.stage_history.push(Stage::Normalize);
            match structural_check(&doc.text, &self.cfg.cleaning) {
                None => {
                    doc.stage_history.push(Stage::Structural);
                    docs_out.push(&doc)?;
                }
                Some(reason) => {
                    rej_out.push(&RejectionRecord {
                        doc_id: doc.doc_id,
                        source: doc.source,
                        stage: reason.stage(),
                        reason,
                        lang: Some(doc.lang),
                        word_count: doc.word_count,
                        entry_word_count: doc.entry_word_count,
                    })?;
                }
            }
        }
        docs_out.finish_and_write_manifest()?;
        rej_out.finish_and_write_manifest()?;
        Ok(())
    }

    fn stage_dedup(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::Dedup;
        let docs = self.read_stage_docs(PipeStage::Clean, stage)?;
        let dir = self.stage_dir(stage);
        let mut docs_out = ShardWriter::new(&dir, "docs", self.cfg.shard_records)?;
        let mut rej_out = ShardWriter::new(&dir, "rejections", self.cfg.shard_records)?;

        let mut index = DedupIndex::new(self.cfg.minhash.clone(), self.cfg.dedup_threshold)
            .map_err(|e| Self::stage_err(stage, e))?;
        for mut doc in docs {
            match index.check_and_insert(doc.doc_id, &doc.text) {
                DedupDecision::Retained => {
                    doc.stage_history.push(Stage::DedupExact);
                    doc.stage_history.push(Stage::DedupNear);
                    docs_out.push(&doc)?;
                }
                DedupDecision::ExactDuplicate => {
                    rej_out.push(&RejectionRecord {
                        doc_id: doc.doc_id,
                        source: doc.source,
                        stage: Stage::DedupExact,
                        reason: RejectReason::ExactDuplicate,
                        lang: Some(doc.lang),
                        word_count: doc.word_count,
                        entry_word_count: doc.entry_word_count,
                    })?;
                }
                DedupDecision::NearDuplicate { .. } => {
                    rej_out.push(&RejectionRecord {
                        doc_id: doc.doc_id,
                        source: doc.source,
                        stage: Stage::DedupNear,
                        reason: RejectReason::NearDuplicate,
                        lang: Some(doc.lang),
                        word_count: doc.word_count,
                        entry_word_count: doc.entry_word_count,
                    })?;
                }
            }
        }
        docs_out.finish_and_write_manifest()?;
        rej_out.finish_and_write_manifest()?;
        Ok(())
    }

    fn stage_filter(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::Filter;
        let docs = self.read_stage_docs(PipeStage::Dedup, stage)?;
        let dir = self.stage_dir(stage);
        let mut docs_out = ShardWriter::new(&dir, "docs", self.cfg.shard_records)?;
        let mut rej_out = ShardWriter::new(&dir, "rejections", self.cfg.shard_records)?;

        let functionwords = match &self.cfg.cleaning.functionword_dir {
            Some(path) => FunctionWords::from_dir(path)?,
            None => FunctionWords::builtin(),
        };

        for mut doc in docs {
            let (scrubbed, redactions) = scrub_pii(&doc.text);
            doc.text = scrubbed;
            doc.redaction_count = redactions;
            doc.recount();
            doc.stage_history.push(Stage::Safety);
            match quality_check(
                &doc.text,
                doc.lang,
                doc.redaction_count,
                &self.cfg.cleaning,
                &functionwords,
            ) {
                None => {
                    doc.stage_history.push(Stage::Quality);
                    docs_out.push(&doc)?;
                }
                Some(reason) => {
                    rej_out.push(&RejectionRecord {
                        doc_id: doc.doc_id,
                        source: doc.source,
                        stage: reason.stage(),
                        reason,
                        lang: Some(doc.lang),
                        word_count: doc.word_count,
                        entry_word_count: doc.entry_word_count,
                    })?;
                }
            }
        }
        docs_out.finish_and_write_manifest()?;
        rej_out.finish_and_write_manifest()?;
        Ok(())
    }

    fn stage_tok(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::Tok;
        let docs = self.read_stage_docs(PipeStage::Filter, stage)?;
        let dir = self.stage_dir(stage);
        fs::create_dir_all(&dir)?;

        let split_seed = self.split_seed();
        let mut budget_left = self.cfg.tokenizer_word_budget;
        let mut train_docs = 0u64;
        let texts = docs.iter().filter_map(|doc| {
            if assign_split(doc.doc_id, &self.cfg.split, split_seed) != Split::Train {
                return None;
            }
            if let Some(left) = budget_left.as_mut() {
                if *left == 0 {
                    return None;
                }
                *left = left.saturating_sub(doc.word_count);
            }
            train_docs += 1;
            Some(doc.text.as_str())
        });

        let model = match train_bpe(texts, self.cfg.vocab_size) {
            Ok(m) => m,
            Err(TokenizerError::CorpusTooSmall { achieved, requested }) => {
                return Err(Self::stage_err(
                    stage,
                    format!("corpus too small for vocab {requested}: achieved {achieved}"),
                ));
            }
            Err(e) => return Err(Self::stage_err(stage, e)),
        };
        model
            .save(&dir.join("model.json"))
            .map_err(|e| Self::stage_err(stage, e))?;
        let summary = serde_json::json!({
            "vocab_size": model.vocab_size(),
            "merges": model.merges().len(),
            "train_docs": train_docs,
        });
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).unwrap())?;
        Ok(())
    }

    fn stage_assemble(&self) -> Result<(), PipelineError> {
        let stage = PipeStage::Assemble;
        let docs = self.read_stage_docs(PipeStage::Filter, stage)?;
        let tok_path = self.stage_dir(PipeStage::Tok).join("model.json");
        let model = BpeModel::load(&tok_path).map_err(|_| PipelineError::MissingInput {
            stage: stage.name(),
            expected: PipeStage::Tok.name(),
        })?;
        let mut encoder = Encoder::new(&model);
        let dir = self.stage_dir(stage);
        fs::create_dir_all(&dir)?;

        // Group sentences per (language, split) in canonical document order.
        let split_seed = self.split_seed();
        let mut groups: BTreeMap<(Lang, Split), Vec<DocFragments>> = BTreeMap::new();
        for doc in &docs {
            let split = assign_split(doc.doc_id, &self.cfg.split, split_seed);
            let sentences: Vec<String> =
                split_sentences(&doc.text).into_iter().map(String::from).collect();
            groups.entry((doc.lang, split)).or_default().push(DocFragments {
                doc_id: doc.doc_id,
                sentences,
            });
        }

        let mut records: Vec<TrainingRecord> = Vec::new();
        for ((lang, split), fragments) in &groups {
            let mut seq = 0u64;
            records.extend(pack_records(
                *lang,
                *split,
                fragments,
                &mut encoder,
                &self.cfg.packing,
                &mut seq,
            ));
        }

        let cap_report = enforce_caps(&mut records, &self.cfg.split);
        fs::write(dir.join("cap_report.csv"), cap_report.to_csv())?;

        if !self.cfg.rebalance_caps.is_empty() {
            let (train, rest): (Vec<_>, Vec<_>) =
                records.into_iter().partition(|r| r.split == Split::Train);
            let train = rebalance_mixture(train, &self.cfg.rebalance_caps, self.rebalance_seed())
                .map_err(|e| Self::stage_err(stage, e))?;
            records = train;
            records.extend(rest);
        }

        // Write per-(split, language) shards.
        let mut writers: BTreeMap<(Split, Lang), ShardWriter> = BTreeMap::new();
        for record in &records {
            let key = (record.split, record.lang);
            let writer = match writers.entry(key) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    let sub = dir
                        .join("records")
                        .join(record.split.name())
                        .join(record.lang.iso_code());
                    e.insert(ShardWriter::new(&sub, "part", self.cfg.shard_records)?)
                }
            };
            writer.push(record)?;
        }
        for (_, writer) in writers {
            writer.finish_and_write_manifest()?;
        }
        Ok(())
    }

    /// Reads every record shard written by assemble, in (split, lang) order.
    pub fn read_records(&self) -> Result<Vec<TrainingRecord>, PipelineError> {
        let dir = self.stage_dir(PipeStage::Assemble).join("records");
        let mut records = Vec::new();
        for split in Split::ALL {
            for lang in Lang::ALL {
                let sub = dir.join(split.name()).join(lang.iso_code());
                if !sub.exists() {
                    continue;
                }
                let manifest = read_shard_manifest(&sub, "part")?;
                records.extend(read_shard_rows::<TrainingRecord>(&sub, &manifest)?);
            }
        }
        Ok(records)
    }

    fn read_rejections(&self) -> Result<Vec<RejectionRecord>, PipelineError> {
        let mut rejections = Vec::new();
        for stage in [
            PipeStage::LangId,
            PipeStage::Clean,
            PipeStage::Dedup,
            PipeStage::Filter,
        ] {
            let dir = self.stage_dir(stage);
            if let Ok(manifest) = read_shard_manifest(&dir, "rejections") {
                rejections.extend(read_shard_rows::<RejectionRecord>(&dir, &manifest)?);
            }
        }
        Ok(rejections)
    }

    fn build_accounting(
        docs: &[CleanDocument],
        rejections: &[RejectionRecord],
    ) -> Vec<DocAccounting> {
        let mut events = Vec::with_capacity(docs.len() + rejections.len());
        for doc in docs {
            events.push(DocAccounting {
                source: doc.source.clone(),
                lang: Some(doc.lang),
                entry_words: doc.entry_word_count,
                post_dedup_words: Some(doc.word_count),
                final_words: Some(doc.word_count),
            });
        }
        for r in rejections {
            let past_dedup = matches!(r.stage, Stage::Safety | Stage::Quality);
            events.push(DocAccounting {
                source: r.source.clone(),
                lang: r.lang,
                entry_words: r.entry_word_count,
                post_dedup_words: past_dedup.then_some(r.word_count),
                final_words: None,
            });
        }
        events
    }

    fn stage_report(&self) -> Result<RunReport, PipelineError> {
        let stage = PipeStage::Report;
        let docs = self.read_stage_docs(PipeStage::Filter, stage)?;
        let rejections = self.read_rejections()?;
        let records = self.read_records()?;

        let ingest_summary: IngestSummary = serde_json::from_str(
            &fs::read_to_string(self.stage_dir(PipeStage::Ingest).join("summary.json"))
                .map_err(|_| PipelineError::MissingInput {
                    stage: stage.name(),
                    expected: PipeStage::Ingest.name(),
                })?,
        )
        .map_err(|e| Self::stage_err(stage, e))?;

        let events = Self::build_accounting(&docs, &rejections);
        let stage_stats = accumulate(&events);
        stage_stats
            .check_monotone()
            .map_err(|e| Self::stage_err(stage, e))?;

        // Conservation: every ingested document is retained or rejected.
        let accounted = docs.len() as u64 + rejections.len() as u64;
        if accounted != ingest_summary.total_records {
            return Err(Self::stage_err(
                stage,
                format!(
                    "conservation violated: {} ingested but {} accounted",
                    ingest_summary.total_records, accounted
                ),
            ));
        }

        let report = RunReport {
            version: 1,
            seed: self.seed,
            config_digest: self.digest.clone(),
            stage_stats,
            split_tokens: split_distribution(&records),
            rejections: rejection_histogram(rejections.iter().map(|r| (r.stage, r.reason))),
            malformed_records: ingest_summary
                .sources
                .iter()
                .map(|s| (s.name.clone(), s.malformed))
                .collect(),
        };

        let reports_dir = self.out.join("reports");
        fs::create_dir_all(&reports_dir)?;
        fs::write(reports_dir.join("run_report.json"), render(&report, ReportFormat::Json))?;
        fs::write(reports_dir.join("run_report.txt"), render(&report, ReportFormat::Text))?;
        fs::write(reports_dir.join("run_report.csv"), render(&report, ReportFormat::Csv))?;
        Ok(report)
    }

    // -- verification -----------------------------------------------------------

    /// Recomputes the published report from persisted shards and rejection
    /// logs, trusting no in-memory state: word counts recount from text,
    /// token counts re-encode with the persisted tokenizer.
    pub fn verify(&self) -> Result<(), PipelineError> {
        let fail = |message: String| Err(PipelineError::Verify(message));

        let report_path = self.out.join("reports/run_report.json");
        let report: RunReport = serde_json::from_str(&fs::read_to_string(&report_path)?)
            .map_err(|e| PipelineError::Verify(format!("unreadable report: {e}")))?;

        let docs = self.read_stage_docs(PipeStage::Filter, PipeStage::Report)?;
        for doc in &docs {
            let recount = count_words(&doc.text);
            if recount != doc.word_count {
                return fail(format!(
                    "doc {}: stored word_count {} but text recounts to {}",
                    doc.doc_id, doc.word_count, recount
                ));
            }
            if doc.word_count > doc.entry_word_count {
                return fail(format!("doc {}: grew past its entry word count", doc.doc_id));
            }
            if !Stage::is_canonical_prefix(&doc.stage_history) {
                return fail(format!("doc {}: non-canonical stage history", doc.doc_id));
            }
        }
        let rejections = self.read_rejections()?;
        for r in &rejections {
            if r.word_count > r.entry_word_count {
                return fail(format!("rejection {}: grew past its entry word count", r.doc_id));
            }
        }

        let events = Self::build_accounting(&docs, &rejections);
        let recomputed_stats = accumulate(&events);
        recomputed_stats
            .check_monotone()
            .map_err(|e| PipelineError::Verify(e.to_string()))?;
        if recomputed_stats != report.stage_stats {
            return fail("stage stats in report do not match recount of artifacts".into());
        }

        let records = self.read_records()?;
        let tok_path = self.stage_dir(PipeStage::Tok).join("model.json");
        let model =
            BpeModel::load(&tok_path).map_err(|e| PipelineError::Verify(e.to_string()))?;
        let mut encoder = Encoder::new(&model);
        for record in &records {
            let recount = encoder.count(&record.text);
            if recount != record.token_count {
                return fail(format!(
                    "record {}: stored token_count {} but text re-encodes to {}",
                    record.record_id, record.token_count, recount
                ));
            }
            if !record.oversize && record.token_count > self.cfg.packing.max_tokens {
                return fail(format!("record {}: exceeds the token cap", record.record_id));
            }
        }
        let recomputed_split = split_distribution(&records);
        if recomputed_split != report.split_tokens {
            return fail("split table in report does not match recount of record shards".into());
        }

        // Cap invariant on the final shards.
        for (lang, by_split) in &recomputed_split {
            for (split, tokens) in by_split {
                if *split != Split::Train && *tokens > self.cfg.split.val_test_token_cap {
                    return fail(format!(
                        "{} {} holds {} tokens, over the {} cap",
                        lang.iso_code(),
                        split.name(),
                        tokens,
                        self.cfg.split.val_test_token_cap
                    ));
                }
            }
        }

        let recomputed_hist: Vec<RejectionCount> =
            rejection_histogram(rejections.iter().map(|r| (r.stage, r.reason)));
        if recomputed_hist != report.rejections {
            return fail("rejection histogram does not match rejection logs".into());
        }
        Ok(())
    }
}
