//! Text normalization and the per-document filters: structural
//! constraints, PII scrubbing, and heuristic quality checks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::model::{count_words, Lang, RejectReason};

/// Thresholds for the structural and quality filters.
///
/// Defaults follow the usual web-corpus heuristics; every value is
/// config-exposed because the right cut-offs vary by source.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CleaningConfig {
    pub min_words: u64,
    pub max_words: u64,
    /// Minimum fraction of Latin letters among all letters.
    pub min_latin_fraction: f64,
    /// Maximum ratio of symbol characters to words.
    pub max_symbol_word_ratio: f64,
    /// Maximum fraction of repeated (non-unique) lines.
    pub max_duplicate_line_fraction: f64,
    /// Acceptable mean word length, in characters.
    pub mean_word_len_bounds: [f64; 2],
    /// Maximum PII redactions per 100 words before the document is dropped.
    pub max_pii_density: f64,
    /// Optional directory of per-language function-word files
    /// (`<iso>.txt`, one word per line) overriding the built-in lists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functionword_dir: Option<std::path::PathBuf>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            min_words: 5,
            max_words: 100_000,
            min_latin_fraction: 0.9,
            max_symbol_word_ratio: 0.1,
            max_duplicate_line_fraction: 0.3,
            mean_word_len_bounds: [2.0, 12.0],
            max_pii_density: 5.0,
            functionword_dir: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Canonicalizes a document: control characters out, HTML stripped and
/// entities decoded, NFC composition, whitespace collapsed, ends trimmed.
///
/// Idempotent: controls are removed before markup handling so entity
/// decoding cannot resurface them, and markup stripping runs to a fixed
/// point so decoded text contains no decodable residue.
pub fn normalize(text: &str) -> String {
    let no_controls = strip_controls(text);
    let mut s = no_controls;
    loop {
        let stripped = strip_markup(&s);
        let decoded = decode_entities(&stripped);
        if decoded == s {
            break;
        }
        s = decoded;
    }
    let composed: String = s.nfc().collect();
    collapse_whitespace(&composed)
}

/// Removes C0/C1 control characters except `\n` and `\t`.
fn strip_controls(text: &str) -> String {
    text.chars()
        .filter(|&c| {
            let code = c as u32;
            let c0 = code < 0x20 && c != '\n' && c != '\t';
            let c1 = (0x7F..=0x9F).contains(&code);
            !(c0 || c1)
        })
        .collect()
}

fn is_tag_start(next: Option<char>) -> bool {
    matches!(next, Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?')
}

/// Drops `<...>` tags (and the bodies of script/style elements), replacing
/// block-level tags with a newline and everything else with a space.
fn strip_markup(text: &str) -> String {
    const BLOCK_TAGS: [&str; 14] = [
        "p", "div", "br", "li", "ul", "ol", "tr", "table", "h1", "h2", "h3", "h4", "h5", "h6",
    ];
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    let mut skip_until_close: Option<&'static str> = None;

    while let Some((i, c)) = chars.next() {
        if c != '<' || !is_tag_start(text[i + 1..].chars().next()) {
            if skip_until_close.is_none() {
                out.push(c);
            }
            continue;
        }
        // Collect the tag up to '>'; an unterminated tag is kept verbatim.
        let Some(end) = text[i..].find('>') else {
            if skip_until_close.is_none() {
                out.push_str(&text[i..]);
            }
            break;
        };
        let tag = &text[i + 1..i + end];
        while let Some(&(j, _)) = chars.peek() {
            if j <= i + end {
                chars.next();
            } else {
                break;
            }
        }
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if let Some(waiting) = skip_until_close {
            if tag.starts_with('/') && name == waiting {
                skip_until_close = None;
            }
            continue;
        }
        if (name == "script" || name == "style") && !tag.starts_with('/') && !tag.ends_with('/') {
            skip_until_close = Some(if name == "script" { "script" } else { "style" });
            continue;
        }
        if BLOCK_TAGS.contains(&name.as_str()) {
            out.push('\n');
        } else {
            out.push(' ');
        }
    }
    out
}

/// Decodes common named and numeric HTML entities.
///
/// Decoded characters that would be control characters are dropped, so the
/// control-stripping guarantee survives decoding.
fn decode_entities(text: &str) -> String {
    fn named(name: &str) -> Option<&'static str> {
        Some(match name {
            "amp" => "&",
            "lt" => "<",
            "gt" => ">",
            "quot" => "\"",
            "apos" => "'",
            "nbsp" => " ",
            "ndash" => "\u{2013}",
            "mdash" => "\u{2014}",
            "hellip" => "\u{2026}",
            "rsquo" => "\u{2019}",
            "lsquo" => "\u{2018}",
            "rdquo" => "\u{201D}",
            "ldquo" => "\u{201C}",
            "copy" => "\u{A9}",
            "reg" => "\u{AE}",
            "trade" => "\u{2122}",
            "deg" => "\u{B0}",
            "middot" => "\u{B7}",
            "laquo" => "\u{AB}",
            "raquo" => "\u{BB}",
            "shy" => "",
            _ => return None,
        })
    }

    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let semi = tail[1..].find(';').map(|k| k + 1);
        let mut consumed = 1;
        let mut replaced = false;
        if let Some(semi) = semi {
            let body = &tail[1..semi];
            if body.len() <= 10 {
                if let Some(stripped) = body.strip_prefix('#') {
                    let code = if let Some(hex) = stripped.strip_prefix(['x', 'X']) {
                        u32::from_str_radix(hex, 16).ok()
                    } else {
                        stripped.parse::<u32>().ok()
                    };
                    if let Some(c) = code.and_then(char::from_u32) {
                        let v = c as u32;
                        let is_control = (v < 0x20 && c != '\n' && c != '\t') || (0x7F..=0x9F).contains(&v);
                        if !is_control {
                            out.push(c);
                        }
                        consumed = semi + 1;
                        replaced = true;
                    }
                } else if let Some(rep) = named(body) {
                    out.push_str(rep);
                    consumed = semi + 1;
                    replaced = true;
                }
            }
        }
        if !replaced {
            out.push('&');
        }
        rest = &rest[pos + consumed..];
    }
    out.push_str(rest);
    out
}

/// Collapses every whitespace run: runs containing a newline become one or
/// two `\n` (capping blank lines at one), all other runs become a single
/// space. Leading/trailing whitespace is trimmed.
fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_newlines: usize = 0;
    let mut pending_space = false;
    for c in text.chars() {
        if c == '\n' {
            pending_newlines += 1;
            pending_space = true;
        } else if c.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                if pending_newlines > 0 {
                    out.push('\n');
                    if pending_newlines >= 2 {
                        out.push('\n');
                    }
                } else {
                    out.push(' ');
                }
            }
            pending_newlines = 0;
            pending_space = false;
            out.push(c);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Structural constraints
// ---------------------------------------------------------------------------

/// True for letters in the Latin blocks covering all eleven orthographies
/// (ASCII, Latin-1, Latin Extended-A/B, Latin Extended Additional).
fn is_latin_letter(c: char) -> bool {
    let v = c as u32;
    c.is_ascii_alphabetic()
        || ((0xC0..=0x24F).contains(&v) && v != 0xD7 && v != 0xF7)
        || (0x1E00..=0x1EFF).contains(&v)
}

/// Checks length, script, and character-distribution constraints on an
/// already-normalized document. `None` means pass.
pub fn structural_check(text: &str, cfg: &CleaningConfig) -> Option<RejectReason> {
    let words = count_words(text);
    if words < cfg.min_words {
        return Some(RejectReason::TooShort);
    }
    if words > cfg.max_words {
        return Some(RejectReason::TooLong);
    }

    let mut letters: u64 = 0;
    let mut latin: u64 = 0;
    let mut char_counts: HashMap<char, u64> = HashMap::new();
    let mut total_chars: u64 = 0;
    for c in text.chars() {
        if c.is_alphabetic() {
            letters += 1;
            if is_latin_letter(c) {
                latin += 1;
            }
        }
        if !c.is_whitespace() {
            *char_counts.entry(c).or_insert(0) += 1;
            total_chars += 1;
        }
    }
    if letters > 0 && (latin as f64) / (letters as f64) < cfg.min_latin_fraction {
        return Some(RejectReason::BadScript);
    }
    if letters == 0 {
        // Nothing alphabetic at all is as bad as the wrong script.
        return Some(RejectReason::BadScript);
    }
    if total_chars > 0 {
        let max_count = char_counts.values().copied().max().unwrap_or(0);
        if (max_count as f64) / (total_chars as f64) > 0.20 {
            return Some(RejectReason::BadCharDistribution);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// PII scrubbing
// ---------------------------------------------------------------------------

static EMAIL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}").unwrap());

static ID_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d{13}\b").unwrap());

// South African numbers: +27 or 0 trunk prefix, two-digit area code, then
// 3+4 digits with optional space/dash groups.
static PHONE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\+27[\s\-]?\(?\d{2}\)?|\(0\d{2}\)|0\d{2})[\s\-]?\d{3}[\s\-]?\d{4}\b").unwrap()
});

fn luhn_ok(digits: &[u8]) -> bool {
    let mut sum = 0u32;
    for (i, &d) in digits.iter().rev().enumerate() {
        let mut v = d as u32;
        if i % 2 == 1 {
            v *= 2;
            if v > 9 {
                v -= 9;
            }
        }
        sum += v;
    }
    sum.is_multiple_of(10)
}

/// Validates the YYMMDD prefix and Luhn check digit of a candidate
/// 13-digit South African identity number.
fn valid_sa_id(s: &str) -> bool {
    let digits: Vec<u8> = s.bytes().map(|b| b - b'0').collect();
    if digits.len() != 13 {
        return false;
    }
    let month = digits[2] * 10 + digits[3];
    let day = digits[4] * 10 + digits[5];
    let max_day = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => 29, // century is ambiguous, so allow leap days
        _ => return false,
    };
    if day == 0 || day > max_day {
        return false;
    }
    luhn_ok(&digits)
}

/// Replaces emails, South African ID numbers, and phone numbers with
/// placeholders; returns the scrubbed text and the redaction count.
///
/// Idempotent: placeholders contain no digits or `@`, so a second pass
/// finds nothing.
pub fn scrub_pii(text: &str) -> (String, u32) {
    let mut count: u32 = 0;

    let emails = EMAIL_RE.replace_all(text, |_: &regex::Captures| {
        count += 1;
        "[EMAIL]"
    });

    let ids = ID_RE.replace_all(&emails, |caps: &regex::Captures| {
        let m = caps.get(0).unwrap().as_str();
        if valid_sa_id(m) {
            count += 1;
            "[IDNUM]".to_string()
        } else {
            m.to_string()
        }
    });

    // The regex crate has no lookbehind, so guard against matching inside a
    // longer digit run by checking the preceding character manually.
    let mut out = String::with_capacity(ids.len());
    let mut last = 0;
    for m in PHONE_RE.find_iter(&ids) {
        let prev = ids[..m.start()].chars().next_back();
        if matches!(prev, Some(c) if c.is_ascii_digit() || c == '+') {
            continue;
        }
        out.push_str(&ids[last..m.start()]);
        out.push_str("[PHONE]");
        count += 1;
        last = m.end();
    }
    out.push_str(&ids[last..]);

    (out, count)
}

// ---------------------------------------------------------------------------
// Quality heuristics
// ---------------------------------------------------------------------------

/// Characters counted as "symbols" for the symbol-to-word ratio. Ordinary
/// sentence punctuation is excluded so prose is not penalized.
fn is_symbol_char(c: char) -> bool {
    if c.is_alphanumeric() || c.is_whitespace() {
        return false;
    }
    !matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '\''
            | '"'
            | '('
            | ')'
            | '-'
            | '\u{2013}'
            | '\u{2014}'
            | '\u{2018}'
            | '\u{2019}'
            | '\u{201C}'
            | '\u{201D}'
            | '\u{2026}'
            | '&'
    )
}

/// Per-language function-word lists used by the stopword heuristic.
#[derive(Debug, Clone)]
pub struct FunctionWords {
    lists: BTreeMap<Lang, HashSet<String>>,
}

macro_rules! embedded_list {
    ($($lang:ident => $file:literal),+ $(,)?) => {
        [$((Lang::$lang, include_str!(concat!("../data/functionwords/", $file)))),+]
    };
}

impl FunctionWords {
    /// The lists shipped with the crate, derived from the seed corpora by
    /// frequency ranking.
    pub fn builtin() -> Self {
        let files = embedded_list![
            Afr => "afr.txt",
            Eng => "eng.txt",
            Nbl => "nbl.txt",
            Nso => "nso.txt",
            Sot => "sot.txt",
            Ssw => "ssw.txt",
            Tsn => "tsn.txt",
            Tso => "tso.txt",
            Ven => "ven.txt",
            Xho => "xho.txt",
            Zul => "zul.txt",
        ];
        let mut lists = BTreeMap::new();
        for (lang, body) in files {
            lists.insert(lang, parse_word_list(body));
        }
        FunctionWords { lists }
    }

    /// Loads `<iso>.txt` files from a directory; missing languages fall
    /// back to the built-in lists.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut fw = FunctionWords::builtin();
        for lang in Lang::ALL {
            let path = dir.join(format!("{}.txt", lang.iso_code()));
            if path.exists() {
                let body = std::fs::read_to_string(&path)?;
                fw.lists.insert(lang, parse_word_list(&body));
            }
        }
        Ok(fw)
    }

    pub fn for_lang(&self, lang: Lang) -> &HashSet<String> {
        &self.lists[&lang]
    }
}

fn parse_word_list(body: &str) -> HashSet<String> {
    body.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Heuristic quality screen over a normalized, scrubbed document.
/// `None` means pass; checks run in a fixed order and the first failure wins.
pub fn quality_check(
    text: &str,
    lang: Lang,
    redaction_count: u32,
    cfg: &CleaningConfig,
    functionwords: &FunctionWords,
) -> Option<RejectReason> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let word_count = words.len() as u64;

    // Templated content: mostly-repeated lines.
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() >= 2 {
        let unique: HashSet<&&str> = lines.iter().collect();
        let dup_fraction = 1.0 - unique.len() as f64 / lines.len() as f64;
        if dup_fraction > cfg.max_duplicate_line_fraction {
            return Some(RejectReason::LowQualityTemplated);
        }
    }

    // Symbol soup or degenerate word shapes. Redaction placeholders are
    // pipeline artifacts, so their brackets do not count as symbols.
    if word_count > 0 {
        let deplaceheld = text
            .replace("[EMAIL]", "")
            .replace("[PHONE]", "")
            .replace("[IDNUM]", "");
        let symbol_count = deplaceheld.chars().filter(|&c| is_symbol_char(c)).count() as u64;
        if symbol_count as f64 / word_count as f64 > cfg.max_symbol_word_ratio {
            return Some(RejectReason::LowQualitySymbols);
        }
        let total_word_chars: u64 = words.iter().map(|w| w.chars().count() as u64).sum();
        let mean_len = total_word_chars as f64 / word_count as f64;
        if mean_len < cfg.mean_word_len_bounds[0] || mean_len > cfg.mean_word_len_bounds[1] {
            return Some(RejectReason::LowQualitySymbols);
        }
    }

    // Long documents with none of the language's function words at all are
    // almost always lists, tables, or misrouted text.
    if word_count >= 50 {
        let list = functionwords.for_lang(lang);
        let any_hit = words.iter().any(|w| {
            let token = w
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            !token.is_empty() && list.contains(&token)
        });
        if !any_hit {
            return Some(RejectReason::LowQualityStopwords);
        }
    }

    if word_count > 0 {
        let density = redaction_count as f64 * 100.0 / word_count as f64;
        if density > cfg.max_pii_density {
            return Some(RejectReason::PiiDense);
        }
    }

    None
}
