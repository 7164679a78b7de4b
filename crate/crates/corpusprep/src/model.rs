//! Shared domain types: the language inventory, document payloads, the
//! stage/rejection taxonomy, and the three-checkpoint word accounting
//! table that every other module feeds.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::Hasher64;

/// The eleven official written South African languages.
///
/// This is a closed set: no other code is constructible, and the ISO 639-3
/// codes are the serialized form everywhere (config, shards, reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Afr,
    Eng,
    Nbl,
    Nso,
    Sot,
    Ssw,
    Tsn,
    Tso,
    Ven,
    Xho,
    Zul,
}

/// Number of target languages.
pub const NUM_LANGS: usize = 11;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown language code: {0:?}")]
pub struct UnknownLanguage(pub String);

impl Lang {
    pub const ALL: [Lang; NUM_LANGS] = [
        Lang::Afr,
        Lang::Eng,
        Lang::Nbl,
        Lang::Nso,
        Lang::Sot,
        Lang::Ssw,
        Lang::Tsn,
        Lang::Tso,
        Lang::Ven,
        Lang::Xho,
        Lang::Zul,
    ];

    pub fn iso_code(self) -> &'static str {
        match self {
            Lang::Afr => "afr",
            Lang::Eng => "eng",
            Lang::Nbl => "nbl",
            Lang::Nso => "nso",
            Lang::Sot => "sot",
            Lang::Ssw => "ssw",
            Lang::Tsn => "tsn",
            Lang::Tso => "tso",
            Lang::Ven => "ven",
            Lang::Xho => "xho",
            Lang::Zul => "zul",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Lang::Afr => "Afrikaans",
            Lang::Eng => "English",
            Lang::Nbl => "isiNdebele",
            Lang::Nso => "Sepedi (Northern Sotho)",
            Lang::Sot => "Sesotho",
            Lang::Ssw => "siSwati",
            Lang::Tsn => "Setswana",
            Lang::Tso => "Xitsonga",
            Lang::Ven => "Tshivenda",
            Lang::Xho => "isiXhosa",
            Lang::Zul => "isiZulu",
        }
    }

    /// Dense index in `ALL`, handy for per-language arrays.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Case-insensitive parse of an ISO 639-3 code.
    pub fn parse(code: &str) -> Result<Lang, UnknownLanguage> {
        let lower = code.to_ascii_lowercase();
        Lang::ALL
            .iter()
            .copied()
            .find(|l| l.iso_code() == lower)
            .ok_or_else(|| UnknownLanguage(code.to_string()))
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.iso_code())
    }
}

/// Number of maximal runs of non-whitespace characters.
///
/// This is the word measure behind all stage accounting; counts are
/// invariant under whitespace normalization.
pub fn count_words(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Validated source name: nonempty lowercase ASCII, unique per manifest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SourceId(String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid source name {0:?}: must be nonempty lowercase ASCII [a-z0-9_-]")]
pub struct InvalidSourceName(pub String);

impl SourceId {
    pub fn new(name: impl Into<String>) -> Result<Self, InvalidSourceName> {
        let name = name.into();
        let ok = !name.is_empty()
            && name
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if ok {
            Ok(SourceId(name))
        } else {
            Err(InvalidSourceName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SourceId {
    type Error = InvalidSourceName;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        SourceId::new(value)
    }
}

impl From<SourceId> for String {
    fn from(value: SourceId) -> String {
        value.0
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Stable opaque document identifier, derived from
/// (source name, shard index, record index) at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DocId(pub u64);

impl DocId {
    /// Deterministic id for a record at a fixed position in a source.
    pub fn derive(source: &SourceId, shard_index: u64, record_index: u64) -> DocId {
        let mut h = Hasher64::new(0x0d0c_1d00);
        h.write_str(source.as_str())
            .write_u64(shard_index)
            .write_u64(record_index);
        DocId(h.finish())
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for DocId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DocId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        u64::from_str_radix(&s, 16)
            .map(DocId)
            .map_err(|_| serde::de::Error::custom(format!("invalid doc id {s:?}")))
    }
}

/// A document as read from a raw source shard.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: DocId,
    pub source: SourceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_lang: Option<Lang>,
    pub text: String,
    pub byte_len: u64,
}

impl RawDocument {
    pub fn new(doc_id: DocId, source: SourceId, declared_lang: Option<Lang>, text: String) -> Self {
        let byte_len = text.len() as u64;
        RawDocument {
            doc_id,
            source,
            declared_lang,
            text,
            byte_len,
        }
    }
}

/// Pipeline stages in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "langid")]
    LangId,
    #[serde(rename = "normalize")]
    Normalize,
    #[serde(rename = "structural")]
    Structural,
    #[serde(rename = "dedup-exact")]
    DedupExact,
    #[serde(rename = "dedup-near")]
    DedupNear,
    #[serde(rename = "safety")]
    Safety,
    #[serde(rename = "quality")]
    Quality,
}

impl Stage {
    pub const CANONICAL: [Stage; 7] = [
        Stage::LangId,
        Stage::Normalize,
        Stage::Structural,
        Stage::DedupExact,
        Stage::DedupNear,
        Stage::Safety,
        Stage::Quality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::LangId => "langid",
            Stage::Normalize => "normalize",
            Stage::Structural => "structural",
            Stage::DedupExact => "dedup-exact",
            Stage::DedupNear => "dedup-near",
            Stage::Safety => "safety",
            Stage::Quality => "quality",
        }
    }

    /// True if `history` is a prefix of the canonical stage order.
    pub fn is_canonical_prefix(history: &[Stage]) -> bool {
        history.len() <= Self::CANONICAL.len()
            && history.iter().zip(Self::CANONICAL.iter()).all(|(a, b)| a == b)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed set of rejection reasons; every document that enters the
/// pipeline ends as retained output or as exactly one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    WrongLanguage,
    TooShort,
    TooLong,
    BadScript,
    BadCharDistribution,
    ExactDuplicate,
    NearDuplicate,
    LowQualityTemplated,
    LowQualitySymbols,
    LowQualityStopwords,
    PiiDense,
}

impl RejectReason {
    pub const ALL: [RejectReason; 11] = [
        RejectReason::WrongLanguage,
        RejectReason::TooShort,
        RejectReason::TooLong,
        RejectReason::BadScript,
        RejectReason::BadCharDistribution,
        RejectReason::ExactDuplicate,
        RejectReason::NearDuplicate,
        RejectReason::LowQualityTemplated,
        RejectReason::LowQualitySymbols,
        RejectReason::LowQualityStopwords,
        RejectReason::PiiDense,
    ];

    /// The stage at which this reason is produced.
    pub fn stage(self) -> Stage {
        match self {
            RejectReason::WrongLanguage => Stage::LangId,
            RejectReason::TooShort
            | RejectReason::TooLong
            | RejectReason::BadScript
            | RejectReason::BadCharDistribution => Stage::Structural,
            RejectReason::ExactDuplicate => Stage::DedupExact,
            RejectReason::NearDuplicate => Stage::DedupNear,
            RejectReason::PiiDense => Stage::Safety,
            RejectReason::LowQualityTemplated
            | RejectReason::LowQualitySymbols
            | RejectReason::LowQualityStopwords => Stage::Quality,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RejectReason::WrongLanguage => "wrong_language",
            RejectReason::TooShort => "too_short",
            RejectReason::TooLong => "too_long",
            RejectReason::BadScript => "bad_script",
            RejectReason::BadCharDistribution => "bad_char_distribution",
            RejectReason::ExactDuplicate => "exact_duplicate",
            RejectReason::NearDuplicate => "near_duplicate",
            RejectReason::LowQualityTemplated => "low_quality_templated",
            RejectReason::LowQualitySymbols => "low_quality_symbols",
            RejectReason::LowQualityStopwords => "low_quality_stopwords",
            RejectReason::PiiDense => "pii_dense",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A document flowing through (or out of) the cleaning stages.
///
/// `entry_word_count` freezes the document's word count at ingestion so
/// the stage accounting table stays recomputable from persisted shards;
/// `word_count` always recomputes exactly from `text`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanDocument {
    pub doc_id: DocId,
    pub source: SourceId,
    pub lang: Lang,
    pub lang_confidence: f64,
    pub text: String,
    pub word_count: u64,
    pub entry_word_count: u64,
    pub stage_history: Vec<Stage>,
    pub redaction_count: u32,
}

impl CleanDocument {
    /// Refreshes `word_count` after a text mutation.
    pub fn recount(&mut self) {
        self.word_count = count_words(&self.text);
    }
}

/// Terminal record for a document that did not survive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub doc_id: DocId,
    pub source: SourceId,
    pub stage: Stage,
    pub reason: RejectReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<Lang>,
    pub word_count: u64,
    pub entry_word_count: u64,
}

/// Word counts at the three accounting checkpoints for one
/// (source, language) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCell {
    pub before_processing: u64,
    pub after_dedup: u64,
    pub after_filter: u64,
}

impl StageCell {
    pub fn is_monotone(&self) -> bool {
        self.before_processing >= self.after_dedup && self.after_dedup >= self.after_filter
    }

    pub fn add(&mut self, other: &StageCell) {
        self.before_processing += other.before_processing;
        self.after_dedup += other.after_dedup;
        self.after_filter += other.after_filter;
    }
}

/// One document's contribution to the accounting table.
///
/// `lang` is `None` for documents rejected before a target language was
/// assigned; those fold into the per-source totals under an "und" row.
#[derive(Debug, Clone)]
pub struct DocAccounting {
    pub source: SourceId,
    pub lang: Option<Lang>,
    /// Words at ingestion (measured after text normalization so later
    /// stages can only shrink it).
    pub entry_words: u64,
    /// Words carried past near-dedup, if the document got that far.
    pub post_dedup_words: Option<u64>,
    /// Words in the retained output, if the document survived everything.
    pub final_words: Option<u64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("stage accounting not monotone for (source {source_id}, lang {lang:?}): {cell:?}")]
pub struct MonotonicityViolation {
    pub source_id: SourceId,
    pub lang: Option<String>,
    pub cell: StageCell,
}

/// Per-(source, language) word counts at the three accounting stages.
///
/// Serializes with string language keys, the undetermined bucket as
/// `"und"`, so the JSON form is a plain nested object.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageStats {
    cells: BTreeMap<SourceId, BTreeMap<Option<Lang>, StageCell>>,
}

impl Serialize for StageStats {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut outer: BTreeMap<&str, BTreeMap<&str, &StageCell>> = BTreeMap::new();
        for (source, row) in &self.cells {
            let entry = outer.entry(source.as_str()).or_default();
            for (lang, cell) in row {
                entry.insert(lang.map(|l| l.iso_code()).unwrap_or("und"), cell);
            }
        }
        outer.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StageStats {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let outer: BTreeMap<String, BTreeMap<String, StageCell>> =
            BTreeMap::deserialize(deserializer)?;
        let mut cells: BTreeMap<SourceId, BTreeMap<Option<Lang>, StageCell>> = BTreeMap::new();
        for (source, row) in outer {
            let source = SourceId::new(source).map_err(serde::de::Error::custom)?;
            let entry = cells.entry(source).or_default();
            for (lang, cell) in row {
                let lang = if lang == "und" {
                    None
                } else {
                    Some(Lang::parse(&lang).map_err(serde::de::Error::custom)?)
                };
                entry.insert(lang, cell);
            }
        }
        Ok(StageStats { cells })
    }
}

impl StageStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, acct: &DocAccounting) {
        let cell = self
            .cells
            .entry(acct.source.clone())
            .or_default()
            .entry(acct.lang)
            .or_default();
        cell.before_processing += acct.entry_words;
        if let Some(w) = acct.post_dedup_words {
            cell.after_dedup += w;
        }
        if let Some(w) = acct.final_words {
            cell.after_filter += w;
        }
    }

    pub fn merge(&mut self, other: &StageStats) {
        for (source, row) in &other.cells {
            for (lang, cell) in row {
                self.cells
                    .entry(source.clone())
                    .or_default()
                    .entry(*lang)
                    .or_default()
                    .add(cell);
            }
        }
    }

    pub fn cell(&self, source: &SourceId, lang: Option<Lang>) -> StageCell {
        self.cells
            .get(source)
            .and_then(|row| row.get(&lang))
            .copied()
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SourceId, Option<Lang>, &StageCell)> {
        self.cells
            .iter()
            .flat_map(|(s, row)| row.iter().map(move |(l, c)| (s, *l, c)))
    }

    /// Row sums over languages, one total cell per source.
    pub fn source_totals(&self) -> BTreeMap<SourceId, StageCell> {
        let mut out = BTreeMap::new();
        for (source, lang_row) in &self.cells {
            let total: &mut StageCell = out.entry(source.clone()).or_default();
            for cell in lang_row.values() {
                total.add(cell);
            }
        }
        out
    }

    pub fn grand_total(&self) -> StageCell {
        let mut total = StageCell::default();
        for (_, _, cell) in self.iter() {
            total.add(cell);
        }
        total
    }

    /// Checks `before >= after_dedup >= after_filter` for every cell.
    pub fn check_monotone(&self) -> Result<(), MonotonicityViolation> {
        for (source, lang, cell) in self.iter() {
            if !cell.is_monotone() {
                return Err(MonotonicityViolation {
                    source_id: source.clone(),
                    lang: lang.map(|l| l.iso_code().to_string()),
                    cell: *cell,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_language_tag_cases() {
        // Table 1 lists isiZulu under code zul.
        assert_eq!(Lang::parse("zul").unwrap(), Lang::Zul);
        assert_eq!(Lang::parse("ZUL").unwrap(), Lang::Zul);
        assert_eq!(Lang::parse("fra"), Err(UnknownLanguage("fra".into())));
        assert_eq!(Lang::ALL.len(), 11);
    }

    #[test]
    fn iso_codes_match_inventory() {
        let codes: Vec<&str> = Lang::ALL.iter().map(|l| l.iso_code()).collect();
        assert_eq!(
            codes,
            ["afr", "eng", "nbl", "nso", "sot", "ssw", "tsn", "tso", "ven", "xho", "zul"]
        );
        for l in Lang::ALL {
            assert_eq!(Lang::parse(l.iso_code()).unwrap(), l);
        }
    }

    #[test]
    fn count_words_cases() {
        assert_eq!(count_words(""), 0);
        assert_eq!(count_words("umuntu ngumuntu ngabantu"), 3);
        // Hand-count of whitespace runs: "a", "b", "c".
        assert_eq!(count_words("a\n b\tc"), 3);
        assert_eq!(count_words("   "), 0);
    }

    #[test]
    fn count_words_whitespace_normalization_invariant() {
        let texts = ["a\n b\tc", "  hello   world ", "one"];
        for t in texts {
            let collapsed = t.split_whitespace().collect::<Vec<_>>().join(" ");
            assert_eq!(count_words(t), count_words(&collapsed));
        }
    }

    #[test]
    fn source_id_validation() {
        assert!(SourceId::new("mc4").is_ok());
        assert!(SourceId::new("inkuba-mono").is_ok());
        assert!(SourceId::new("").is_err());
        assert!(SourceId::new("MC4").is_err());
        assert!(SourceId::new("a b").is_err());
    }

    #[test]
    fn doc_id_is_deterministic_and_positional() {
        let s = SourceId::new("wura").unwrap();
        assert_eq!(DocId::derive(&s, 0, 0), DocId::derive(&s, 0, 0));
        assert_ne!(DocId::derive(&s, 0, 0), DocId::derive(&s, 0, 1));
        assert_ne!(DocId::derive(&s, 0, 1), DocId::derive(&s, 1, 0));
    }

    #[test]
    fn doc_id_serde_round_trip() {
        let id = DocId(0x00ab_cdef_0123_4567);
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(json, "\"00abcdef01234567\"");
        let back: DocId = serde_json::from_str(&json).unwrap();
        assert_eq!(back, id);
    }

    #[test]
    fn stage_history_prefix_rule() {
        use Stage::*;
        assert!(Stage::is_canonical_prefix(&[]));
        assert!(Stage::is_canonical_prefix(&[LangId, Normalize]));
        assert!(Stage::is_canonical_prefix(&Stage::CANONICAL));
        assert!(!Stage::is_canonical_prefix(&[Normalize]));
        assert!(!Stage::is_canonical_prefix(&[LangId, Structural]));
    }

    #[test]
    fn reject_reason_stage_mapping() {
        assert_eq!(RejectReason::WrongLanguage.stage(), Stage::LangId);
        assert_eq!(RejectReason::NearDuplicate.stage(), Stage::DedupNear);
        assert_eq!(RejectReason::PiiDense.stage(), Stage::Safety);
        assert_eq!(RejectReason::LowQualityStopwords.stage(), Stage::Quality);
    }

    fn acct(source: &SourceId, lang: Option<Lang>, e: u64, d: Option<u64>, f: Option<u64>) -> DocAccounting {
        DocAccounting {
            source: source.clone(),
            lang,
            entry_words: e,
            post_dedup_words: d,
            final_words: f,
        }
    }

    #[test]
    fn stage_stats_accumulation_and_totals() {
        let wura = SourceId::new("wura").unwrap();
        let mut stats = StageStats::new();
        // Retained doc: 100 words in, 90 past dedup, 80 out.
        stats.add(&acct(&wura, Some(Lang::Zul), 100, Some(90), Some(80)));
        // Rejected at dedup.
        stats.add(&acct(&wura, Some(Lang::Zul), 50, None, None));
        // Rejected at langid, language unknown.
        stats.add(&acct(&wura, None, 30, None, None));

        let cell = stats.cell(&wura, Some(Lang::Zul));
        assert_eq!(cell.before_processing, 150);
        assert_eq!(cell.after_dedup, 90);
        assert_eq!(cell.after_filter, 80);

        let totals = stats.source_totals();
        assert_eq!(totals[&wura].before_processing, 180);
        stats.check_monotone().unwrap();
    }

    #[test]
    fn stage_stats_merge_matches_sequential() {
        let s = SourceId::new("mc4").unwrap();
        let a = acct(&s, Some(Lang::Afr), 10, Some(10), Some(8));
        let b = acct(&s, Some(Lang::Afr), 7, None, None);
        let mut seq = StageStats::new();
        seq.add(&a);
        seq.add(&b);
        let mut left = StageStats::new();
        left.add(&a);
        let mut right = StageStats::new();
        right.add(&b);
        left.merge(&right);
        assert_eq!(left, seq);
    }
}
