//! Aggregating pipeline events into the two accounting tables — word
//! counts per source at three stages, token counts per language and
//! split — plus the rejection histogram and retention summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Split, TrainingRecord};
use crate::model::{DocAccounting, Lang, SourceId, Stage, StageStats};

/// Count of rejections at one (stage, reason).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCount {
    pub stage: String,
    pub reason: String,
    pub count: u64,
}

/// The full run report: everything the rendered tables are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub seed: u64,
    pub config_digest: String,
    pub stage_stats: StageStats,
    /// Token totals per language and split (Table 2 shape).
    pub split_tokens: BTreeMap<Lang, BTreeMap<Split, u64>>,
    pub rejections: Vec<RejectionCount>,
    pub malformed_records: BTreeMap<SourceId, u64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("unsupported report format {0:?}")]
    UnsupportedFormat(String),
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
}

/// Output encodings for `render`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" | "text-table" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(ReportError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Folds per-document accounting events into the stage table.
pub fn accumulate<'a>(events: impl IntoIterator<Item = &'a DocAccounting>) -> StageStats {
    let mut stats = StageStats::new();
    for event in events {
        stats.add(event);
    }
    stats
}

/// Token totals per (language, split) over the final records.
pub fn split_distribution(records: &[TrainingRecord]) -> BTreeMap<Lang, BTreeMap<Split, u64>> {
    let mut table: BTreeMap<Lang, BTreeMap<Split, u64>> = BTreeMap::new();
    for r in records {
        *table.entry(r.lang).or_default().entry(r.split).or_insert(0) += r.token_count;
    }
    table
}

/// Folds rejection (stage, reason) pairs into sorted counts.
pub fn rejection_histogram(
    pairs: impl IntoIterator<Item = (Stage, crate::model::RejectReason)>,
) -> Vec<RejectionCount> {
    let mut map: BTreeMap<(Stage, crate::model::RejectReason), u64> = BTreeMap::new();
    for (stage, reason) in pairs {
        *map.entry((stage, reason)).or_insert(0) += 1;
    }
    map.into_iter()
        .map(|((stage, reason), count)| RejectionCount {
            stage: stage.name().to_string(),
            reason: reason.name().to_string(),
            count,
        })
        .collect()
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn split_totals(table: &BTreeMap<Lang, BTreeMap<Split, u64>>) -> BTreeMap<Split, u64> {
    let mut totals = BTreeMap::new();
    for by_split in table.values() {
        for (&split, &tokens) in by_split {
            *totals.entry(split).or_insert(0) += tokens;
        }
    }
    totals
}

/// Within-split percentage, two decimals.
fn pct(tokens: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        tokens as f64 * 100.0 / total as f64
    }
}

/// Renders the token-count table: one row per language, token count and
/// within-split share for train/validation/test.
pub fn render_split_table_text(table: &BTreeMap<Lang, BTreeMap<Split, u64>>) -> String {
    let totals = split_totals(table);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<26} {:>16} {:>7} {:>14} {:>7} {:>14} {:>7}\n",
        "Language", "Train", "%", "Validation", "%", "Test", "%"
    ));
    let get = |lang: Lang, split: Split| -> u64 {
        table
            .get(&lang)
            .and_then(|m| m.get(&split))
            .copied()
            .unwrap_or(0)
    };
    for lang in Lang::ALL {
        if !table.contains_key(&lang) {
            continue;
        }
        out.push_str(&format!(
            "{:<26} {:>16} {:>7.2} {:>14} {:>7.2} {:>14} {:>7.2}\n",
            lang.display_name(),
            thousands(get(lang, Split::Train)),
            pct(get(lang, Split::Train), totals.get(&Split::Train).copied().unwrap_or(0)),
            thousands(get(lang, Split::Validation)),
            pct(
                get(lang, Split::Validation),
                totals.get(&Split::Validation).copied().unwrap_or(0)
            ),
            thousands(get(lang, Split::Test)),
            pct(get(lang, Split::Test), totals.get(&Split::Test).copied().unwrap_or(0)),
        ));
    }
    out.push_str(&format!(
        "{:<26} {:>16} {:>7.2} {:>14} {:>7.2} {:>14} {:>7.2}\n",
        "Total",
        thousands(totals.get(&Split::Train).copied().unwrap_or(0)),
        100.0,
        thousands(totals.get(&Split::Validation).copied().unwrap_or(0)),
        100.0,
        thousands(totals.get(&Split::Test).copied().unwrap_or(0)),
        100.0,
    ));
    out
}

/// Renders the per-source stage table with the column heads
/// "Before processing / After deduplication / After filtering".
pub fn render_stage_table_text(stats: &StageStats) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>18} {:>20} {:>17} {:>17}\n",
        "Source", "Before processing", "After deduplication", "After filtering", "Percent retained"
    ));
    for (source, cell) in stats.source_totals() {
        let retained = if cell.before_processing == 0 {
            0.0
        } else {
            cell.after_filter as f64 * 100.0 / cell.before_processing as f64
        };
        out.push_str(&format!(
            "{:<14} {:>18} {:>20} {:>17} {:>17.1}\n",
            source.as_str(),
            thousands(cell.before_processing),
            thousands(cell.after_dedup),
            thousands(cell.after_filter),
            retained,
        ));
    }
    let total = stats.grand_total();
    let retained = if total.before_processing == 0 {
        0.0
    } else {
        total.after_filter as f64 * 100.0 / total.before_processing as f64
    };
    out.push_str(&format!(
        "{:<14} {:>18} {:>20} {:>17} {:>17.1}\n",
        "Total",
        thousands(total.before_processing),
        thousands(total.after_dedup),
        thousands(total.after_filter),
        retained,
    ));
    out
}

fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "run report (seed {}, config {})\n\n",
        report.seed, report.config_digest
    ));
    out.push_str("Token counts by language and split\n");
    out.push_str(&render_split_table_text(&report.split_tokens));
    out.push('\n');
    out.push_str("Per-source word counts at three stages\n");
    out.push_str(&render_stage_table_text(&report.stage_stats));
    out.push('\n');
    out.push_str("Rejections by stage and reason\n");
    for r in &report.rejections {
        out.push_str(&format!("{:<12} {:<24} {:>12}\n", r.stage, r.reason, thousands(r.count)));
    }
    if !report.malformed_records.is_empty() {
        out.push('\n');
        out.push_str("Malformed input records skipped at ingestion\n");
        for (source, count) in &report.malformed_records {
            out.push_str(&format!("{:<14} {:>12}\n", source.as_str(), thousands(*count)));
        }
    }
    out
}

/// Flat CSV with a section discriminator; parses back losslessly.
fn render_csv(report: &RunReport) -> String {
    let mut out = String::from("section,a,b,c,d,e\n");
    out.push_str(&format!("meta,seed,{},,,\n", report.seed));
    out.push_str(&format!("meta,config_digest,{},,,\n", report.config_digest));
    for (lang, by_split) in &report.split_tokens {
        for (split, tokens) in by_split {
            out.push_str(&format!("split,{},{},{},,\n", lang.iso_code(), split.name(), tokens));
        }
    }
    for (source, lang, cell) in report.stage_stats.iter() {
        out.push_str(&format!(
            "stage,{},{},{},{},{}\n",
            source.as_str(),
            lang.map(|l| l.iso_code()).unwrap_or("und"),
            cell.before_processing,
            cell.after_dedup,
            cell.after_filter
        ));
    }
    for r in &report.rejections {
        out.push_str(&format!("rejection,{},{},{},,\n", r.stage, r.reason, r.count));
    }
    for (source, count) in &report.malformed_records {
        out.push_str(&format!("malformed,{},{},,,\n", source.as_str(), count));
    }
    out
}

/// Parses `render_csv` output back into a report.
pub fn parse_csv(body: &str) -> Result<RunReport, ReportError> {
    let mut report = RunReport {
        version: 1,
        seed: 0,
        config_digest: String::new(),
        stage_stats: StageStats::new(),
        split_tokens: BTreeMap::new(),
        rejections: Vec::new(),
        malformed_records: BTreeMap::new(),
    };
    let err = |line: usize, message: &str| ReportError::CsvParse {
        line,
        message: message.to_string(),
    };
    for (i, line) in body.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(i + 1, "expected 6 fields"));
        }
        match fields[0] {
            "meta" => match fields[1] {
                "seed" => {
                    report.seed = fields[2].parse().map_err(|_| err(i + 1, "bad seed"))?;
                }
                "config_digest" => report.config_digest = fields[2].to_string(),
                _ => return Err(err(i + 1, "unknown meta key")),
            },
            "split" => {
                let lang = Lang::parse(fields[1]).map_err(|_| err(i + 1, "bad lang"))?;
                let split = match fields[2] {
                    "train" => Split::Train,
                    "validation" => Split::Validation,
                    "test" => Split::Test,
                    _ => return Err(err(i + 1, "bad split")),
                };
                let tokens: u64 = fields[3].parse().map_err(|_| err(i + 1, "bad tokens"))?;
                report.split_tokens.entry(lang).or_default().insert(split, tokens);
            }
            "stage" => {
                let source = SourceId::new(fields[1]).map_err(|_| err(i + 1, "bad source"))?;
                let lang = if fields[2] == "und" {
                    None
                } else {
                    Some(Lang::parse(fields[2]).map_err(|_| err(i + 1, "bad lang"))?)
                };
                let before: u64 = fields[3].parse().map_err(|_| err(i + 1, "bad count"))?;
                let after_dedup: u64 = fields[4].parse().map_err(|_| err(i + 1, "bad count"))?;
                let after_filter: u64 = fields[5].parse().map_err(|_| err(i + 1, "bad count"))?;
                report.stage_stats.add(&DocAccounting {
                    source,
                    lang,
                    entry_words: before,
                    post_dedup_words: Some(after_dedup),
                    final_words: Some(after_filter),
                });
            }
            "rejection" => {
                report.rejections.push(RejectionCount {
                    stage: fields[1].to_string(),
                    reason: fields[2].to_string(),
                    count: fields[3].parse().map_err(|_| err(i + 1, "bad count"))?,
                });
            }
            "malformed" => {
                let source = SourceId::new(fields[1]).map_err(|_| err(i + 1, "bad source"))?;
                let count: u64 = fields[2].parse().map_err(|_| err(i + 1, "bad count"))?;
                report.malformed_records.insert(source, count);
            }
            other => return Err(err(i + 1, &format!("unknown section {other:?}"))),
        }
    }
    Ok(report)
}

/// Serializes the report in the requested format.
pub fn render(report: &RunReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => render_text(report).into_bytes(),
        ReportFormat::Csv => render_csv(report).into_bytes(),
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
            bytes.push(b'\n');
            bytes
        }
    }
}
