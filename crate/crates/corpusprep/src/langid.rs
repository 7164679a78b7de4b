//! Document- and line-level language identification over the eleven
//! target languages.
//!
//! The classifier is a multinomial character n-gram model (orders 1..=4)
//! with add-α smoothing, trained from clean seed text. Scores combine an
//! in-set posterior with a goodness-of-fit gate calibrated on the training
//! data, so text from outside the eleven languages lands on `None` instead
//! of being forced onto the nearest in-set language.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Lang, NUM_LANGS};

/// Classifier hyperparameters. All values ship as defaults and are
/// config-exposed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LangIdConfig {
    /// Maximum character n-gram order (grams of 1..=n are pooled).
    pub ngram_max: usize,
    /// Add-α smoothing constant.
    pub alpha: f64,
    /// Document-level acceptance threshold on confidence.
    pub tau_doc: f64,
    /// Line-level drop threshold: a line is removed when the confidence
    /// that it is *not* the document language reaches this value.
    pub tau_line: f64,
    /// Goodness-of-fit margin, in nats below the language's self-fit,
    /// before confidence starts decaying.
    pub fit_margin: f64,
    /// Lines shorter than this (in characters, trimmed) inherit the
    /// document decision instead of being classified alone.
    pub min_line_chars: usize,
    /// Cap on the effective evidence (n-gram count) entering the
    /// posterior, so confidence saturates instead of growing without
    /// bound on long inputs.
    pub evidence_cap: f64,
}

impl Default for LangIdConfig {
    fn default() -> Self {
        LangIdConfig {
            ngram_max: 4,
            alpha: 0.1,
            tau_doc: 0.5,
            tau_line: 0.7,
            fit_margin: 0.9,
            min_line_chars: 20,
            evidence_cap: 60.0,
        }
    }
}

/// Outcome of classifying one text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangDecision {
    /// `None` when confidence fell below the document threshold.
    pub lang: Option<Lang>,
    /// Posterior confidence in `[0, 1]`, discounted by goodness of fit.
    pub confidence: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot classify empty text")]
pub struct EmptyText;

#[derive(Debug, Error)]
pub enum LangIdError {
    #[error("no training samples for language(s): {}", .0.iter().map(|l| l.iso_code()).collect::<Vec<_>>().join(", "))]
    MissingLanguage(Vec<Lang>),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone)]
struct Entry {
    counts: [u32; NUM_LANGS],
    logp: [f32; NUM_LANGS],
}

/// Trained character n-gram model covering all eleven languages.
#[derive(Debug, Clone)]
pub struct LangIdModel {
    cfg: LangIdConfig,
    table: FxHashMap<Box<str>, Entry>,
    totals: [u64; NUM_LANGS],
    /// log P(unseen gram | lang) under add-α smoothing.
    logp_unseen: [f64; NUM_LANGS],
    /// Mean per-gram log-likelihood of each language's own training text.
    self_fit: [f64; NUM_LANGS],
    trained_on: u64,
}

/// Builds the gram stream for scoring: lowercased tokens with collapsed
/// whitespace. Capitalized words (mostly proper nouns) and digit-bearing
/// tokens carry no language signal and would only add unseen-gram noise,
/// so they are dropped; if nothing survives, the whole text is used
/// lowercased as a fallback.
fn prepare(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        if token.chars().any(|c| c.is_ascii_digit()) {
            continue;
        }
        if token.chars().next().is_some_and(char::is_uppercase) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        for c in token.chars() {
            for lc in c.to_lowercase() {
                out.push(lc);
            }
        }
    }
    if out.is_empty() {
        for token in text.split_whitespace() {
            if !out.is_empty() {
                out.push(' ');
            }
            for c in token.chars() {
                for lc in c.to_lowercase() {
                    out.push(lc);
                }
            }
        }
    }
    out
}

/// Calls `f` with every character n-gram of order 1..=max.
fn for_each_gram(prepared: &str, max: usize, mut f: impl FnMut(&str)) {
    let bounds: Vec<usize> = prepared
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(prepared.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    for i in 0..n_chars {
        for n in 1..=max.min(n_chars - i) {
            f(&prepared[bounds[i]..bounds[i + n]]);
        }
    }
}

struct Scores {
    /// Total log-likelihood per language.
    loglik: [f64; NUM_LANGS],
    grams: u64,
}

impl Scores {
    fn mean(&self, lang: usize) -> f64 {
        self.loglik[lang] / self.grams as f64
    }
}

impl LangIdModel {
    pub fn config(&self) -> &LangIdConfig {
        &self.cfg
    }

    pub fn trained_on(&self) -> u64 {
        self.trained_on
    }

    /// Trains from labeled monolingual samples. Every language needs at
    /// least one sample.
    pub fn train<I, S>(samples: I, cfg: LangIdConfig) -> Result<LangIdModel, LangIdError>
    where
        I: IntoIterator<Item = (Lang, S)>,
        S: AsRef<str>,
    {
        let mut table: FxHashMap<Box<str>, Entry> = FxHashMap::default();
        let mut totals = [0u64; NUM_LANGS];
        let mut seen = [false; NUM_LANGS];
        let mut trained_on = 0u64;

        for (lang, sample) in samples {
            let li = lang.index();
            let prepared = prepare(sample.as_ref());
            if prepared.is_empty() {
                continue;
            }
            seen[li] = true;
            trained_on += 1;
            for_each_gram(&prepared, cfg.ngram_max, |g| {
                match table.get_mut(g) {
                    Some(e) => e.counts[li] += 1,
                    None => {
                        let mut e = Entry {
                            counts: [0; NUM_LANGS],
                            logp: [0.0; NUM_LANGS],
                        };
                        e.counts[li] = 1;
                        table.insert(Box::from(g), e);
                    }
                }
                totals[li] += 1;
            });
        }

        let missing: Vec<Lang> = Lang::ALL.iter().copied().filter(|l| !seen[l.index()]).collect();
        if !missing.is_empty() {
            return Err(LangIdError::MissingLanguage(missing));
        }

        let mut model = LangIdModel {
            cfg,
            table,
            totals,
            logp_unseen: [0.0; NUM_LANGS],
            self_fit: [0.0; NUM_LANGS],
            trained_on,
        };
        model.finalize();
        Ok(model)
    }

    /// Precomputes log-probabilities and the per-language self-fit used by
    /// the goodness-of-fit gate.
    fn finalize(&mut self) {
        let vocab = self.table.len() as f64;
        let alpha = self.cfg.alpha;
        for li in 0..NUM_LANGS {
            self.logp_unseen[li] = (alpha / (self.totals[li] as f64 + alpha * vocab)).ln();
        }
        for entry in self.table.values_mut() {
            for li in 0..NUM_LANGS {
                let denom = self.totals[li] as f64 + alpha * vocab;
                entry.logp[li] = ((entry.counts[li] as f64 + alpha) / denom).ln() as f32;
            }
        }
        // Pooled mean log-likelihood of each language's own training grams:
        // sum over grams of count * logp, divided by the gram total.
        let mut fit_sums = [0.0f64; NUM_LANGS];
        for entry in self.table.values() {
            for (sum, (&count, &logp)) in
                fit_sums.iter_mut().zip(entry.counts.iter().zip(entry.logp.iter()))
            {
                if count > 0 {
                    *sum += count as f64 * logp as f64;
                }
            }
        }
        for (fit, (&sum, &total)) in self
            .self_fit
            .iter_mut()
            .zip(fit_sums.iter().zip(self.totals.iter()))
        {
            *fit = if total > 0 { sum / total as f64 } else { f64::NEG_INFINITY };
        }
    }

    /// Smoothed probability of one gram under one language; used by tests
    /// to check the tables normalize.
    pub fn gram_probability(&self, gram: &str, lang: Lang) -> f64 {
        let vocab = self.table.len() as f64;
        let denom = self.totals[lang.index()] as f64 + self.cfg.alpha * vocab;
        let count = self
            .table
            .get(gram)
            .map(|e| e.counts[lang.index()])
            .unwrap_or(0) as f64;
        (count + self.cfg.alpha) / denom
    }

    pub fn grams(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(|k| k.as_ref())
    }

    fn score(&self, prepared: &str) -> Option<Scores> {
        let mut loglik = [0.0f64; NUM_LANGS];
        let mut grams = 0u64;
        for_each_gram(prepared, self.cfg.ngram_max, |g| {
            grams += 1;
            match self.table.get(g) {
                Some(e) => {
                    for (ll, &logp) in loglik.iter_mut().zip(e.logp.iter()) {
                        *ll += logp as f64;
                    }
                }
                None => {
                    for (ll, &unseen) in loglik.iter_mut().zip(self.logp_unseen.iter()) {
                        *ll += unseen;
                    }
                }
            }
        });
        (grams > 0).then_some(Scores { loglik, grams })
    }

    /// Softmax over per-gram mean log-likelihoods scaled by capped
    /// evidence, plus the argmax index.
    fn posterior(&self, scores: &Scores) -> ([f64; NUM_LANGS], usize) {
        let evidence = (scores.grams as f64).min(self.cfg.evidence_cap);
        let mut scaled = [0.0f64; NUM_LANGS];
        let mut best = 0;
        for li in 0..NUM_LANGS {
            scaled[li] = scores.mean(li) * evidence;
            if scaled[li] > scaled[best] {
                best = li;
            }
        }
        let max = scaled[best];
        let mut sum = 0.0;
        for v in &mut scaled {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in &mut scaled {
            *v /= sum;
        }
        (scaled, best)
    }

    /// Multiplier in `(0, 1]` that decays once the text fits `lang` worse
    /// than the calibrated threshold.
    fn fit_penalty(&self, scores: &Scores, lang: usize) -> f64 {
        let threshold = self.self_fit[lang] - self.cfg.fit_margin;
        let deficit = (threshold - scores.mean(lang)).max(0.0);
        (-6.0 * deficit).exp()
    }

    /// Confidence that `text` is written in `lang`.
    fn confidence_for(&self, scores: &Scores, lang: usize) -> f64 {
        let (posterior, _) = self.posterior(scores);
        posterior[lang] * self.fit_penalty(scores, lang)
    }

    /// Document-level decision: argmax-posterior language with fit-gated
    /// confidence; `lang` is `None` exactly when confidence < τ_doc.
    pub fn classify(&self, text: &str) -> Result<LangDecision, EmptyText> {
        let prepared = prepare(text);
        let scores = self.score(&prepared).ok_or(EmptyText)?;
        let (posterior, best) = self.posterior(&scores);
        let confidence = (posterior[best] * self.fit_penalty(&scores, best)).clamp(0.0, 1.0);
        let lang = (confidence >= self.cfg.tau_doc).then(|| Lang::ALL[best]);
        Ok(LangDecision { lang, confidence })
    }

    /// Line-level filtering under the document's decision.
    ///
    /// Lines shorter than the configured minimum inherit the document
    /// language. A longer line is dropped when the confidence that it is
    /// *not* the document language reaches τ_line. The whole document is
    /// rejected when no target language dominates, or when under half of
    /// the retained characters agree with the document label.
    pub fn segment_and_filter(&self, text: &str) -> SegmentOutcome {
        let doc_decision = match self.classify(text) {
            Ok(d) => d,
            Err(EmptyText) => {
                return SegmentOutcome::Rejected;
            }
        };
        let Some(doc_lang) = doc_decision.lang else {
            return SegmentOutcome::Rejected;
        };
        let dl = doc_lang.index();

        let mut kept: Vec<&str> = Vec::new();
        let mut kept_chars = 0u64;
        let mut agree_chars = 0u64;
        for line in text.split('\n') {
            let trimmed = line.trim();
            let n_chars = trimmed.chars().count() as u64;
            if (n_chars as usize) < self.cfg.min_line_chars {
                // Short lines inherit the document decision.
                kept.push(line);
                kept_chars += n_chars;
                agree_chars += n_chars;
                continue;
            }
            let prepared = prepare(trimmed);
            let Some(scores) = self.score(&prepared) else {
                kept.push(line);
                continue;
            };
            let conf_doc = self.confidence_for(&scores, dl);
            if 1.0 - conf_doc >= self.cfg.tau_line {
                continue; // confidently not the document language
            }
            kept.push(line);
            kept_chars += n_chars;
            if conf_doc >= 0.5 {
                agree_chars += n_chars;
            }
        }

        let retained = kept.join("\n");
        if retained.trim().is_empty() {
            return SegmentOutcome::Rejected;
        }
        if kept_chars > 0 && (agree_chars as f64) / (kept_chars as f64) < 0.5 {
            return SegmentOutcome::Rejected;
        }
        SegmentOutcome::Retained {
            text: retained,
            lang: doc_lang,
            confidence: doc_decision.confidence,
        }
    }

    // -- persistence --------------------------------------------------------

    /// Serializes as a versioned binary blob with a JSON header.
    pub fn save(&self, path: &Path) -> Result<(), LangIdError> {
        let header = ModelHeader {
            version: 1,
            cfg: self.cfg.clone(),
            languages: Lang::ALL.iter().map(|l| l.iso_code().to_string()).collect(),
            totals: self.totals.to_vec(),
            self_fit: self.self_fit.to_vec(),
            trained_on: self.trained_on,
            entries: self.table.len() as u64,
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");

        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"LIDM")?;
        w.write_all(&(header_json.len() as u32).to_le_bytes())?;
        w.write_all(&header_json)?;
        // BTreeMap ordering keeps the blob byte-identical across runs.
        let ordered: BTreeMap<&str, &Entry> =
            self.table.iter().map(|(k, v)| (k.as_ref(), v)).collect();
        for (gram, entry) in ordered {
            let bytes = gram.as_bytes();
            w.write_all(&(bytes.len() as u16).to_le_bytes())?;
            w.write_all(bytes)?;
            for c in entry.counts {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LangIdModel, LangIdError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"LIDM" {
            return Err(LangIdError::Malformed("bad magic".into()));
        }
        let mut len4 = [0u8; 4];
        r.read_exact(&mut len4)?;
        let mut header_json = vec![0u8; u32::from_le_bytes(len4) as usize];
        r.read_exact(&mut header_json)?;
        let header: ModelHeader = serde_json::from_slice(&header_json)
            .map_err(|e| LangIdError::Malformed(e.to_string()))?;
        if header.version != 1 {
            return Err(LangIdError::Malformed(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let expected: Vec<String> = Lang::ALL.iter().map(|l| l.iso_code().to_string()).collect();
        if header.languages != expected {
            return Err(LangIdError::Malformed("language list mismatch".into()));
        }
        if header.totals.len() != NUM_LANGS || header.self_fit.len() != NUM_LANGS {
            return Err(LangIdError::Malformed("bad table dimensions".into()));
        }

        let mut table = FxHashMap::default();
        table.reserve(header.entries as usize);
        for _ in 0..header.entries {
            let mut len2 = [0u8; 2];
            r.read_exact(&mut len2)?;
            let mut gram = vec![0u8; u16::from_le_bytes(len2) as usize];
            r.read_exact(&mut gram)?;
            let gram = String::from_utf8(gram)
                .map_err(|_| LangIdError::Malformed("non-utf8 gram".into()))?;
            let mut counts = [0u32; NUM_LANGS];
            for c in &mut counts {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                *c = u32::from_le_bytes(b);
            }
            table.insert(gram.into_boxed_str(), Entry {
                counts,
                logp: [0.0; NUM_LANGS],
            });
        }

        let mut model = LangIdModel {
            cfg: header.cfg,
            table,
            totals: header.totals.try_into().unwrap(),
            logp_unseen: [0.0; NUM_LANGS],
            self_fit: [0.0; NUM_LANGS],
            trained_on: header.trained_on,
        };
        model.finalize();
        Ok(model)
    }
}

/// Result of line-level filtering.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentOutcome {
    Retained {
        text: String,
        lang: Lang,
        confidence: f64,
    },
    /// No target language dominates: reject as wrong_language.
    Rejected,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    cfg: LangIdConfig,
    languages: Vec<String>,
    totals: Vec<u64>,
    self_fit: Vec<f64>,
    trained_on: u64,
    entries: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::inventory;

    fn tiny_model() -> LangIdModel {
        let mut samples = Vec::new();
        for lang in Lang::ALL {
            for (i, sentence) in inventory::seed_sentences(lang, 120, 0xA11).into_iter().enumerate() {
                // hold out every 6th sentence for the accuracy checks below
                if i % 6 != 0 {
                    samples.push((lang, sentence));
                }
            }
        }
        LangIdModel::train(samples, LangIdConfig::default()).unwrap()
    }

    #[test]
    fn train_requires_all_languages() {
        let samples: Vec<(Lang, String)> = Lang::ALL
            .iter()
            .filter(|l| **l != Lang::Ven)
            .map(|&l| (l, format!("voorbeeld teks vir {}", l.iso_code())))
            .collect();
        match LangIdModel::train(samples, LangIdConfig::default()) {
            Err(LangIdError::MissingLanguage(langs)) => assert_eq!(langs, vec![Lang::Ven]),
            other => panic!("expected MissingLanguage, got {other:?}"),
        }
    }

    #[test]
    fn probability_tables_normalize() {
        let model = tiny_model();
        // Σ_g P(g | lang) over the known vocabulary is exactly 1 - the
        // unseen mass times (V - vocab entries), i.e. 1 when summed with
        // add-α smoothing over the table itself.
        for lang in [Lang::Zul, Lang::Afr, Lang::Ven] {
            let total: f64 = model.grams().map(|g| model.gram_probability(g, lang)).sum();
            assert!((total - 1.0).abs() < 1e-9, "Σ P = {total} for {lang}");
        }
    }

    #[test]
    fn classify_known_sentences() {
        let model = tiny_model();
        // Oracle: the declared language of held-out seed sentences.
        let zul = model
            .classify("abantu abaningi bathanda ukufunda izincwadi ngoba kubalulekile kakhulu")
            .unwrap();
        assert_eq!(zul.lang, Some(Lang::Zul));
        let afr = model
            .classify("die kinders gaan elke dag skool toe en hulle leer baie nuwe dinge daar")
            .unwrap();
        assert_eq!(afr.lang, Some(Lang::Afr));
    }

    #[test]
    fn classify_rejects_out_of_set_language() {
        let model = tiny_model();
        let fr = model.classify("Le chat dort sur le tapis.").unwrap();
        assert_eq!(fr.lang, None, "confidence was {}", fr.confidence);
        assert!(fr.confidence < model.config().tau_doc);
    }

    #[test]
    fn classify_empty_text_errors() {
        let model = tiny_model();
        assert_eq!(model.classify("   "), Err(EmptyText));
    }

    #[test]
    fn classify_is_deterministic() {
        let model = tiny_model();
        let a = model.classify("umuntu ngumuntu ngabantu kusho ukuthi sisizana njalo").unwrap();
        let b = model.classify("umuntu ngumuntu ngabantu kusho ukuthi sisizana njalo").unwrap();
        assert_eq!(a.lang, b.lang);
        assert_eq!(a.confidence, b.confidence);
    }

    #[test]
    fn duplication_keeps_decision_stable() {
        let model = tiny_model();
        let text = "abantu abaningi bathanda ukufunda izincwadi ngoba kubalulekile";
        let single = model.classify(text).unwrap();
        let doubled = model.classify(&format!("{text} {text}")).unwrap();
        assert_eq!(single.lang, doubled.lang);
        assert!((doubled.confidence - single.confidence).abs() < 0.1);
    }

    #[test]
    fn segment_filters_foreign_lines() {
        let model = tiny_model();
        let eng_lines: Vec<String> = inventory::seed_sentences(Lang::Eng, 10, 0xE1);
        let mut lines = eng_lines.clone();
        lines.insert(3, "Le gouvernement annonce une nouvelle politique culturelle.".into());
        lines.insert(7, "Les enfants jouent dans le jardin toute la journée.".into());
        let doc = lines.join("\n");
        match model.segment_and_filter(&doc) {
            SegmentOutcome::Retained { text, lang, .. } => {
                assert_eq!(lang, Lang::Eng);
                let kept: Vec<&str> = text.split('\n').collect();
                assert_eq!(kept.len(), 10, "kept: {kept:#?}");
                for line in kept {
                    assert!(eng_lines.iter().any(|l| l == line));
                }
            }
            SegmentOutcome::Rejected => panic!("mixed doc should be retained"),
        }
    }

    #[test]
    fn segment_rejects_pure_foreign_doc() {
        let model = tiny_model();
        let doc = "Le chat dort sur le tapis pendant la journée.\n\
                   Les oiseaux chantent dans les arbres du jardin.\n\
                   La bibliothèque municipale ouvre ses portes demain matin.";
        assert_eq!(model.segment_and_filter(doc), SegmentOutcome::Rejected);
    }

    #[test]
    fn segment_retains_homogeneous_doc_and_only_input_lines() {
        let model = tiny_model();
        let doc = inventory::seed_sentences(Lang::Xho, 8, 0x77).join("\n");
        match model.segment_and_filter(&doc) {
            SegmentOutcome::Retained { text, lang, .. } => {
                assert_eq!(lang, Lang::Xho);
                assert_eq!(text, doc);
                let input_lines: Vec<&str> = doc.split('\n').collect();
                for line in text.split('\n') {
                    assert!(input_lines.contains(&line));
                }
            }
            SegmentOutcome::Rejected => panic!("pure isiXhosa doc rejected"),
        }
    }

    #[test]
    fn model_round_trips_through_disk() {
        let model = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lidm");
        model.save(&path).unwrap();
        let loaded = LangIdModel::load(&path).unwrap();

        let text = "vhathu vhanzhi vha funa u vhala bugu dza tshivenda vhukuma";
        let a = model.classify(text).unwrap();
        let b = loaded.classify(text).unwrap();
        assert_eq!(a.lang, b.lang);
        assert!((a.confidence - b.confidence).abs() < 1e-9);

        // Saving again produces identical bytes.
        let path2 = dir.path().join("model2.lidm");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}


