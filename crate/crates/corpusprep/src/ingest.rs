//! Manifest-driven ingestion of raw source shards and the sharded
//! JSON-lines writer used by every stage.
//!
//! Two input formats cover the practical shapes of downloaded corpora:
//! JSON-lines with a required `text` field, and plain text with blank-line
//! document separation. Malformed records are counted and skipped, never
//! fatal.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{DocId, Lang, RawDocument, SourceId};

fn hex_digest(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// How records are laid out inside a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    /// One JSON object per line with a required `text` field and optional
    /// `lang` / `url`.
    Jsonl,
    /// Plain text; blank lines separate documents.
    Text,
}

/// One raw source in the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: SourceId,
    pub format: RecordFormat,
    /// Files or directories; directories expand to their files sorted by
    /// name, which fixes the shard order.
    pub paths: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_lang: Option<Lang>,
}

/// The run manifest: sources, output root, and the seed every
/// deterministic choice must flow from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub sources: Vec<SourceSpec>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("manifest io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("duplicate source name {0:?} in manifest")]
    DuplicateSource(String),
    #[error("manifest path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("colliding doc_id {0} within source {1}")]
    DocIdCollision(DocId, SourceId),
}

/// Loads and validates a run manifest (JSON).
pub fn load_manifest(path: &Path) -> Result<RunManifest, IngestError> {
    let body = fs::read_to_string(path)?;
    let manifest: RunManifest =
        serde_json::from_str(&body).map_err(|e| IngestError::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for source in &manifest.sources {
        if !seen.insert(source.name.clone()) {
            return Err(IngestError::DuplicateSource(source.name.to_string()));
        }
        for p in &source.paths {
            if !p.exists() {
                return Err(IngestError::MissingPath(p.clone()));
            }
        }
    }
    Ok(manifest)
}

/// Expands a source's paths to an ordered list of shard files.
pub fn shard_files(spec: &SourceSpec) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in &spec.paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.retain(|e| e.is_file());
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

#[derive(Deserialize)]
struct JsonlLine {
    text: String,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    url: Option<String>,
}

/// Documents read from one shard file plus the malformed-record count.
pub struct ShardRead {
    pub documents: Vec<RawDocument>,
    pub malformed: u64,
}

/// Reads one shard file. `shard_index` is the file's position in the
/// source's ordered file list; ids derive from (source, shard, record).
pub fn read_shard_file(
    spec: &SourceSpec,
    path: &Path,
    shard_index: u64,
) -> std::io::Result<ShardRead> {
    match spec.format {
        RecordFormat::Jsonl => read_jsonl(spec, path, shard_index),
        RecordFormat::Text => read_plain_text(spec, path, shard_index),
    }
}

fn read_jsonl(spec: &SourceSpec, path: &Path, shard_index: u64) -> std::io::Result<ShardRead> {
    let mut documents = Vec::new();
    let mut malformed = 0u64;
    let mut record_index = 0u64;
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        let parsed = std::str::from_utf8(&buf)
            .ok()
            .and_then(|line| serde_json::from_str::<JsonlLine>(line).ok());
        match parsed {
            Some(line) if !line.text.trim().is_empty() => {
                let declared = line
                    .lang
                    .as_deref()
                    .and_then(|code| Lang::parse(code).ok())
                    .or(spec.declared_lang);
                let doc_id = DocId::derive(&spec.name, shard_index, record_index);
                documents.push(RawDocument::new(doc_id, spec.name.clone(), declared, line.text));
                record_index += 1;
            }
            _ => malformed += 1,
        }
    }
    Ok(ShardRead {
        documents,
        malformed,
    })
}

fn read_plain_text(spec: &SourceSpec, path: &Path, shard_index: u64) -> std::io::Result<ShardRead> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;

    let mut documents = Vec::new();
    let mut malformed = 0u64;
    let mut record_index = 0u64;

    // Split on runs of blank lines at the byte level so a single bad block
    // cannot poison the rest of the file.
    for block in split_blank_line_blocks(&bytes) {
        match std::str::from_utf8(block) {
            Ok(text) if !text.trim().is_empty() => {
                let doc_id = DocId::derive(&spec.name, shard_index, record_index);
                documents.push(RawDocument::new(
                    doc_id,
                    spec.name.clone(),
                    spec.declared_lang,
                    text.trim_end_matches('\n').to_string(),
                ));
                record_index += 1;
            }
            Ok(_) => {}
            Err(_) => malformed += 1,
        }
    }
    Ok(ShardRead {
        documents,
        malformed,
    })
}

/// Splits bytes into blocks separated by blank lines (a newline followed
/// by optional spaces/tabs and another newline).
fn split_blank_line_blocks(bytes: &[u8]) -> Vec<&[u8]> {
    let mut blocks = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\n' {
            // Look ahead across horizontal whitespace for another newline.
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t' || bytes[j] == b'\r') {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'\n' {
                blocks.push(&bytes[start..i]);
                // Swallow the whole blank-line run.
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if start < bytes.len() {
        blocks.push(&bytes[start..]);
    }
    blocks
}

// ---------------------------------------------------------------------------
// Shard writing
// ---------------------------------------------------------------------------

/// One written shard: relative path, record count, content checksum.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ShardEntry {
    pub path: PathBuf,
    pub records: u64,
    pub sha256: String,
}

/// Manifest describing a set of written shards.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ShardManifest {
    pub shards: Vec<ShardEntry>,
    pub total_records: u64,
}

#[derive(Debug, Error)]
pub enum ShardVerifyError {
    #[error("shard io: {0}")]
    Io(#[from] std::io::Error),
    #[error("shard {path}: expected {expected} records, found {found}")]
    RecordCount {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("shard {path}: checksum mismatch")]
    Checksum { path: PathBuf },
}

/// Incremental JSON-lines shard writer: rows stream in, shards roll over
/// at `max_records_per_shard`, and `finish` yields the manifest.
pub struct ShardWriter {
    dir: PathBuf,
    stem: String,
    max_records: u64,
    writer: Option<std::io::BufWriter<fs::File>>,
    hasher: Sha256,
    records_in_shard: u64,
    shard_index: u64,
    manifest: ShardManifest,
}

impl ShardWriter {
    pub fn new(dir: &Path, stem: &str, max_records_per_shard: u64) -> std::io::Result<Self> {
        assert!(max_records_per_shard > 0, "shard capacity must be positive");
        fs::create_dir_all(dir)?;
        Ok(ShardWriter {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            max_records: max_records_per_shard,
            writer: None,
            hasher: Sha256::new(),
            records_in_shard: 0,
            shard_index: 0,
            manifest: ShardManifest::default(),
        })
    }

    fn roll_shard(&mut self) -> std::io::Result<()> {
        if let Some(mut w) = self.writer.take() {
            w.flush()?;
            let hasher = std::mem::take(&mut self.hasher);
            self.manifest.shards.push(ShardEntry {
                path: PathBuf::from(format!("{}-{:05}.jsonl", self.stem, self.shard_index)),
                records: self.records_in_shard,
                sha256: hex_digest(&hasher.finalize()),
            });
            self.manifest.total_records += self.records_in_shard;
            self.shard_index += 1;
            self.records_in_shard = 0;
        }
        Ok(())
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> std::io::Result<()> {
        if self.writer.is_none() {
            let rel = format!("{}-{:05}.jsonl", self.stem, self.shard_index);
            let file = fs::File::create(self.dir.join(rel))?;
            self.writer = Some(std::io::BufWriter::new(file));
        }
        let line = serde_json::to_string(row).expect("row serializes");
        let w = self.writer.as_mut().unwrap();
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        self.records_in_shard += 1;
        if self.records_in_shard >= self.max_records {
            self.roll_shard()?;
        }
        Ok(())
    }

    /// Closes the open shard and returns the manifest; pair with
    /// `write_shard_manifest` to persist it.
    pub fn finish(mut self) -> std::io::Result<ShardManifest> {
        self.roll_shard()?;
        Ok(self.manifest)
    }

    /// Closes the open shard and writes `{stem}.manifest.json` beside it.
    pub fn finish_and_write_manifest(mut self) -> std::io::Result<ShardManifest> {
        self.roll_shard()?;
        write_shard_manifest(&self.dir, &self.stem, &self.manifest)?;
        Ok(self.manifest)
    }
}

/// Writes rows as JSON-lines shards under `dir`, at most
/// `max_records_per_shard` rows each, named `{stem}-{index:05}.jsonl`.
/// Zero rows produce an empty manifest and no files.
pub fn write_shards<T: Serialize>(
    dir: &Path,
    stem: &str,
    rows: impl IntoIterator<Item = T>,
    max_records_per_shard: u64,
) -> std::io::Result<ShardManifest> {
    let mut writer = ShardWriter::new(dir, stem, max_records_per_shard)?;
    for row in rows {
        writer.push(&row)?;
    }
    writer.finish()
}

/// Writes the shard manifest next to its shards.
pub fn write_shard_manifest(dir: &Path, stem: &str, manifest: &ShardManifest) -> std::io::Result<()> {
    let path = dir.join(format!("{stem}.manifest.json"));
    fs::write(path, serde_json::to_string_pretty(manifest).expect("manifest serializes"))?;
    Ok(())
}

pub fn read_shard_manifest(dir: &Path, stem: &str) -> std::io::Result<ShardManifest> {
    let path = dir.join(format!("{stem}.manifest.json"));
    let body = fs::read_to_string(path)?;
    serde_json::from_str(&body)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

/// Reads every row from the manifest's shards, in shard order.
pub fn read_shard_rows<T: DeserializeOwned>(
    dir: &Path,
    manifest: &ShardManifest,
) -> std::io::Result<Vec<T>> {
    let mut rows = Vec::with_capacity(manifest.total_records as usize);
    for shard in &manifest.shards {
        let file = fs::File::open(dir.join(&shard.path))?;
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: T = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Re-reads the shards and checks both record counts and checksums.
pub fn verify_shards(dir: &Path, manifest: &ShardManifest) -> Result<(), ShardVerifyError> {
    for shard in &manifest.shards {
        let path = dir.join(&shard.path);
        let mut hasher = Sha256::new();
        let mut found = 0u64;
        let file = fs::File::open(&path)?;
        let mut reader = BufReader::new(file);
        let mut buf = Vec::new();
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf);
            found += 1;
        }
        if found != shard.records {
            return Err(ShardVerifyError::RecordCount {
                path: shard.path.clone(),
                expected: shard.records,
                found,
            });
        }
        let digest = hex_digest(&hasher.finalize());
        if digest != shard.sha256 {
            return Err(ShardVerifyError::Checksum {
                path: shard.path.clone(),
            });
        }
    }
    Ok(())
}
