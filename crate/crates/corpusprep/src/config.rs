//! Run configuration: one file (TOML or JSON) wiring every stage's
//! parameters, with a stable digest over the effective values so resumed
//! runs can detect configuration drift.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{PackingConfig, SplitPolicy};
use crate::clean::CleaningConfig;
use crate::dedup::MinHashParams;
use crate::hash::hash_str;
use crate::langid::LangIdConfig;
use crate::model::Lang;

/// Language-identification wiring: either a pre-trained model file or a
/// directory of per-language seed text (`<iso>.txt`) to train from.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LangIdSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_dir: Option<PathBuf>,
    pub config: LangIdConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    /// Path to the run manifest (JSON).
    pub manifest: PathBuf,
    /// Output root; falls back to the manifest's `output_dir`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Run seed; falls back to the manifest's `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads for the parallel stages (0 = one per core).
    pub workers: usize,
    pub langid: LangIdSettings,
    pub cleaning: CleaningConfig,
    pub minhash: MinHashParams,
    pub dedup_threshold: f64,
    pub split: SplitPolicy,
    pub packing: PackingConfig,
    pub vocab_size: u32,
    /// Optional cap on pretoken occurrences consumed by tokenizer training.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokenizer_word_budget: Option<u64>,
    /// Per-language maximum train-mixture fractions; empty = no rebalance.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub rebalance_caps: BTreeMap<Lang, f64>,
    /// Records per output shard file.
    pub shard_records: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("manifest.json"),
            output_dir: None,
            seed: None,
            workers: 0,
            langid: LangIdSettings::default(),
            cleaning: CleaningConfig::default(),
            minhash: MinHashParams::default(),
            dedup_threshold: 0.8,
            split: SplitPolicy::default(),
            packing: PackingConfig::default(),
            vocab_size: 65_536,
            tokenizer_word_budget: None,
            rebalance_caps: BTreeMap::new(),
            shard_records: 4096,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Loads a TOML or JSON config, chosen by file extension.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let body = std::fs::read_to_string(path)?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&body).map_err(|e| parse_err(e.to_string()))?,
            _ => toml::from_str(&body).map_err(|e| parse_err(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.minhash
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.split
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.dedup_threshold) {
            return Err(ConfigError::Invalid(format!(
                "dedup_threshold {} outside [0, 1]",
                self.dedup_threshold
            )));
        }
        if self.vocab_size < crate::tokenizer::BASE_VOCAB {
            return Err(ConfigError::Invalid(format!(
                "vocab_size {} below minimum {}",
                self.vocab_size,
                crate::tokenizer::BASE_VOCAB
            )));
        }
        for (lang, cap) in &self.rebalance_caps {
            if !(*cap > 0.0 && *cap <= 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "rebalance cap for {lang} is {cap}; must be in (0, 1]"
                )));
            }
        }
        if self.shard_records == 0 {
            return Err(ConfigError::Invalid("shard_records must be positive".into()));
        }
        Ok(())
    }

    /// Digest of the canonical (JSON) serialization; stable across runs
    /// with equal effective configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", hash_str(0xD16E57, &canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_contract() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.vocab_size, 65_536);
        assert_eq!(cfg.dedup_threshold, 0.8);
        assert_eq!(cfg.split.val_test_token_cap, 2_000_000);
        assert_eq!(cfg.split.train_pct, 80);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.digest(), b.digest());
        let mut c = RunConfig::default();
        c.vocab_size = 32_768;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn toml_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
manifest = "fixture/manifest.json"
seed = 7
vocab_size = 4096
dedup_threshold = 0.85

[split]
val_test_token_cap = 200000

[rebalance_caps]
afr = 0.25
eng = 0.25
"#,
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.vocab_size, 4096);
        assert_eq!(cfg.split.val_test_token_cap, 200_000);
        assert_eq!(cfg.split.train_pct, 80);
        assert_eq!(cfg.rebalance_caps[&Lang::Afr], 0.25);
    }

    #[test]
    fn json_config_also_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"manifest": "m.json", "vocab_size": 1000}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.vocab_size, 1000);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = RunConfig::default();
        cfg.dedup_threshold = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.vocab_size = 10;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.rebalance_caps.insert(Lang::Afr, 0.0);
        assert!(cfg.validate().is_err());
    }
}
