//! Tokenizer-level analysis across languages: fertility, script-based
//! vocabulary allocation, unique-token usage and cross-language effect sizes
//! before and after removing a prompt-length covariate.
//!
//! # Vocabulary file format
//!
//! UTF-8 text, one entry per line: `<token_id>\t<decoded text>`. The decoded
//! text is escaped so every entry fits on one line:
//!
//! | escape | byte |
//! |--------|------|
//! | `\\`   | `0x5C` |
//! | `\t`   | `0x09` |
//! | `\n`   | `0x0A` |
//! | `\r`   | `0x0D` |
//! | `\xHH` | any byte, two hex digits |
//!
//! `\xHH` lets byte-level tokens that are not valid UTF-8 round-trip
//! losslessly. Blank lines are ignored. Lines starting with `#` are
//! directives or comments; `#vocab_size N` declares the full vocabulary size
//! when ids are sparse. Without it the size is `max id + 1`.
//!
//! # Script ranges
//!
//! [`classify_script`] uses these blocks:
//!
//! - Latin: `A–Z`, `a–z`, U+00C0–U+024F except `×` and `÷`, U+1E00–U+1EFF,
//!   U+2C60–U+2C7F, U+A720–U+A7FF, U+AB30–U+AB6F, fullwidth Latin letters.
//! - Han: U+3005–U+3007, U+3400–U+4DBF, U+4E00–U+9FFF, U+F900–U+FAFF,
//!   U+20000–U+2EBEF, U+2F800–U+2FA1F.
//! - Kana: U+3040–U+30FF, U+31F0–U+31FF, halfwidth katakana U+FF66–U+FF9F.
//! - Arabic: U+0600–U+06FF, U+0750–U+077F, U+08A0–U+08FF, U+FB50–U+FDFF,
//!   U+FE70–U+FEFF.
//! - Cyrillic: U+0400–U+052F.
//! - Digit: ASCII and fullwidth digits.
//! - Punct/symbol: ASCII punctuation, U+00A1–U+00BF, `×`, `÷`, U+2010–U+2BFF,
//!   U+3001–U+3004, U+3008–U+303F, fullwidth punctuation.
//! - Everything else, whitespace included, is Other.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{cohens_d, residualize, spearman, StatsError, TestResult};
use crate::summary::GenerationSummary;
use crate::taxonomy::Language;

#[derive(Debug, Error)]
pub enum MultilingualError {
    #[error("character count must be positive")]
    ZeroCharacters,
    #[error("token count must be positive")]
    ZeroTokens,
    #[error("vocabulary line {line}: {message}")]
    VocabParse { line: usize, message: String },
    #[error("reading vocabulary: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, MultilingualError>;

/// Tokens per source character, where characters are Unicode scalar values.
pub fn fertility(token_count: u64, source_char_count: u64) -> Result<f64> {
    if source_char_count == 0 {
        return Err(MultilingualError::ZeroCharacters);
    }
    if token_count == 0 {
        return Err(MultilingualError::ZeroTokens);
    }
    Ok(token_count as f64 / source_char_count as f64)
}

/// Number of Unicode scalar values in `text`, internal whitespace included.
pub fn source_char_count(text: &str) -> u64 {
    text.chars().count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    Latin,
    Han,
    /// Hiragana and katakana.
    Kana,
    Arabic,
    Cyrillic,
    Digit,
    PunctSymbol,
    Other,
}

pub fn classify_script(ch: char) -> Script {
    let c = ch as u32;
    match c {
        0x41..=0x5A | 0x61..=0x7A => Script::Latin,
        0x30..=0x39 | 0xFF10..=0xFF19 => Script::Digit,
        0x21..=0x2F | 0x3A..=0x40 | 0x5B..=0x60 | 0x7B..=0x7E => Script::PunctSymbol,
        0xD7 | 0xF7 => Script::PunctSymbol,
        0xA1..=0xBF => Script::PunctSymbol,
        0xC0..=0x24F
        | 0x1E00..=0x1EFF
        | 0x2C60..=0x2C7F
        | 0xA720..=0xA7FF
        | 0xAB30..=0xAB6F
        | 0xFF21..=0xFF3A
        | 0xFF41..=0xFF5A => Script::Latin,
        0x400..=0x52F => Script::Cyrillic,
        0x600..=0x6FF | 0x750..=0x77F | 0x8A0..=0x8FF | 0xFB50..=0xFDFF | 0xFE70..=0xFEFF => {
            Script::Arabic
        }
        0x3005..=0x3007
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2EBEF
        | 0x2F800..=0x2FA1F => Script::Han,
        0x3040..=0x30FF | 0x31F0..=0x31FF | 0xFF66..=0xFF9F => Script::Kana,
        0x2010..=0x2BFF | 0x3001..=0x3004 | 0x3008..=0x303F => Script::PunctSymbol,
        0xFF01..=0xFF0F | 0xFF1A..=0xFF20 | 0xFF3B..=0xFF40 | 0xFF5B..=0xFF65 => {
            Script::PunctSymbol
        }
        _ => Script::Other,
    }
}

/// Scripts whose tokens count as allocated to `language` by default.
pub fn default_scripts(language: Language) -> &'static [Script] {
    match language {
        Language::En | Language::Pl => &[Script::Latin],
        Language::Ja => &[Script::Han, Script::Kana],
        Language::Zh => &[Script::Han],
        Language::Ar => &[Script::Arabic],
        Language::Other => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token_id: u32,
    /// Decoded bytes; not necessarily valid UTF-8.
    pub bytes: Vec<u8>,
}

impl VocabEntry {
    pub fn text(&self) -> Option<&str> {
        std::str::from_utf8(&self.bytes).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizerProfile {
    pub vocab_size: usize,
    /// Sorted by token id, ids unique.
    pub entries: Vec<VocabEntry>,
}

fn unescape(s: &str, line: usize) -> Result<Vec<u8>> {
    let err = |message: &str| MultilingualError::VocabParse {
        line,
        message: message.to_string(),
    };
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\\' {
            out.push(bytes[i]);
            i += 1;
            continue;
        }
        match bytes.get(i + 1) {
            Some(b'\\') => out.push(b'\\'),
            Some(b't') => out.push(b'\t'),
            Some(b'n') => out.push(b'\n'),
            Some(b'r') => out.push(b'\r'),
            Some(b'x') => {
                let hex = s
                    .get(i + 2..i + 4)
                    .ok_or_else(|| err("truncated \\x escape"))?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| err("bad \\x escape"))?);
                i += 4;
                continue;
            }
            Some(_) => return Err(err("unknown escape")),
            None => return Err(err("dangling backslash")),
        }
        i += 2;
    }
    Ok(out)
}

fn escape(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    let mut rest = bytes;
    while !rest.is_empty() {
        let (valid, bad) = match std::str::from_utf8(rest) {
            Ok(s) => (s, &[][..]),
            Err(e) => {
                let (v, b) = rest.split_at(e.valid_up_to());
                (std::str::from_utf8(v).unwrap(), b)
            }
        };
        for ch in valid.chars() {
            match ch {
                '\\' => out.push_str("\\\\"),
                '\t' => out.push_str("\\t"),
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                c => out.push(c),
            }
        }
        match bad.split_first() {
            Some((b, tail)) => {
                let _ = write!(out, "\\x{b:02x}");
                rest = tail;
            }
            None => rest = &[],
        }
    }
    out
}

impl TokenizerProfile {
    pub fn new(mut entries: Vec<VocabEntry>, vocab_size: Option<usize>) -> Result<Self> {
        entries.sort_by_key(|e| e.token_id);
        if let Some(w) = entries.windows(2).find(|w| w[0].token_id == w[1].token_id) {
            return Err(MultilingualError::Invalid(format!(
                "duplicate token id {}",
                w[0].token_id
            )));
        }
        let needed = entries.last().map_or(0, |e| e.token_id as usize + 1);
        let vocab_size = vocab_size.unwrap_or(needed);
        if vocab_size < needed {
            return Err(MultilingualError::Invalid(format!(
                "token id {} outside declared vocab_size {vocab_size}",
                needed - 1
            )));
        }
        Ok(TokenizerProfile {
            vocab_size,
            entries,
        })
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut declared = None;
        for (idx, line) in reader.split(b'\n').enumerate() {
            let lineno = idx + 1;
            let mut line = line?;
            if line.last() == Some(&b'\r') {
                line.pop();
            }
            let line = String::from_utf8(line).map_err(|_| MultilingualError::VocabParse {
                line: lineno,
                message: "line is not UTF-8; escape raw bytes as \\xHH".into(),
            })?;
            if line.is_empty() {
                continue;
            }
            if let Some(directive) = line.strip_prefix('#') {
                if let Some(n) = directive.strip_prefix("vocab_size") {
                    let n = n.trim().parse().map_err(|_| MultilingualError::VocabParse {
                        line: lineno,
                        message: "bad vocab_size directive".into(),
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| MultilingualError::VocabParse {
                    line: lineno,
                    message: "expected <id>\\t<text>".into(),
                })?;
            let token_id = id.parse().map_err(|_| MultilingualError::VocabParse {
                line: lineno,
                message: format!("bad token id {id:?}"),
            })?;
            entries.push(VocabEntry {
                token_id,
                bytes: unescape(text, lineno)?,
            });
        }
        Self::new(entries, declared)
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "#vocab_size {}", self.vocab_size)?;
        for e in &self.entries {
            writeln!(w, "{}\t{}", e.token_id, escape(&e.bytes))?;
        }
        Ok(())
    }
}

/// Word-boundary markers used by byte-level and sentencepiece vocabularies:
/// `Ġ` (space), `Ċ` (newline) and `▁` (space).
const BOUNDARY_MARKERS: [char; 3] = ['\u{120}', '\u{10A}', '\u{2581}'];

/// Number of entries made only of characters from `scripts`, ignoring
/// whitespace and boundary markers. An entry needs at least one script
/// character; entries that are not valid UTF-8 count as [`Script::Other`].
pub fn vocab_allocation(profile: &TokenizerProfile, scripts: &[Script]) -> u64 {
    profile
        .entries
        .iter()
        .filter(|e| match e.text() {
            None => scripts.contains(&Script::Other),
            Some(text) => {
                let mut any = false;
                for ch in text.chars() {
                    if ch.is_whitespace() || BOUNDARY_MARKERS.contains(&ch) {
                        continue;
                    }
                    if !scripts.contains(&classify_script(ch)) {
                        return false;
                    }
                    any = true;
                }
                any
            }
        })
        .count() as u64
}

pub fn unique_tokens(sampled_token_ids: &[u32]) -> usize {
    sampled_token_ids.iter().collect::<HashSet<_>>().len()
}

/// Contrast of one language against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageContrast {
    pub language: Language,
    pub n: usize,
    pub raw_d: std::result::Result<f64, StatsError>,
    pub residualized_d: std::result::Result<f64, StatsError>,
}

/// Cohen's d of each language against `baseline`, on raw ED and on ED
/// residualized on token count over the pooled sample.
pub fn residualized_contrast(
    ed: &[f64],
    token_counts: &[f64],
    languages: &[Language],
    baseline: Language,
) -> Result<Vec<LanguageContrast>> {
    if ed.len() != token_counts.len() || ed.len() != languages.len() {
        return Err(MultilingualError::Invalid(
            "ed, token counts and languages differ in length".into(),
        ));
    }
    let mut groups: BTreeMap<Language, Vec<usize>> = BTreeMap::new();
    for (i, l) in languages.iter().enumerate() {
        groups.entry(*l).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(MultilingualError::Invalid("need at least two languages".into()));
    }
    let base_idx = groups
        .get(&baseline)
        .ok_or_else(|| MultilingualError::Invalid(format!("baseline {baseline} absent")))?;
    if base_idx.len() < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            got: base_idx.len(),
        }
        .into());
    }
    let resid = residualize(ed, token_counts)?;
    let pick = |v: &[f64], idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| v[i]).collect() };
    let (base_raw, base_res) = (pick(ed, base_idx), pick(&resid, base_idx));
    Ok(groups
        .iter()
        .filter(|(l, _)| **l != baseline)
        .map(|(l, idx)| LanguageContrast {
            language: *l,
            n: idx.len(),
            raw_d: cohens_d(&pick(ed, idx), &base_raw),
            residualized_d: cohens_d(&pick(&resid, idx), &base_res),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageReport {
    pub language: Language,
    pub n: usize,
    pub mean_ed: f64,
    /// Mean prompt fertility over generations that record both counts.
    pub fertility: Option<f64>,
    pub vocab_allocation: Option<u64>,
    pub unique_tokens_per_generation: f64,
    pub cohens_d_vs_baseline: Option<f64>,
    pub residualized_cohens_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Per-language reports over `summaries`. Residualized contrasts need a
/// prompt token count on every row and are otherwise omitted with a note.
pub fn language_reports(
    summaries: &[GenerationSummary],
    baseline: Language,
    profile: Option<&TokenizerProfile>,
) -> Result<Vec<LanguageReport>> {
    let mut by_lang: BTreeMap<Language, Vec<&GenerationSummary>> = BTreeMap::new();
    for s in summaries {
        by_lang.entry(s.row.language).or_default().push(s);
    }
    if by_lang.is_empty() {
        return Err(MultilingualError::Invalid("no summaries".into()));
    }

    let ed: Vec<f64> = summaries.iter().map(|s| s.ed_mean).collect();
    let langs: Vec<Language> = summaries.iter().map(|s| s.row.language).collect();
    let counts: Option<Vec<f64>> = summaries
        .iter()
        .map(|s| s.row.prompt_token_count.map(f64::from))
        .collect();
    let contrasts = match &counts {
        Some(c) if by_lang.len() >= 2 && by_lang.contains_key(&baseline) => {
            Some(residualized_contrast(&ed, c, &langs, baseline))
        }
        _ => None,
    };

    let mut out = Vec::new();
    for (lang, rows) in &by_lang {
        let n = rows.len();
        let mean_ed = rows.iter().map(|s| s.ed_mean).sum::<f64>() / n as f64;
        let fert: Vec<f64> = rows
            .iter()
            .filter_map(|s| {
                let t = s.row.prompt_token_count?;
                let c = s.row.prompt_char_count?;
                fertility(t.into(), c.into()).ok()
            })
            .collect();
        let mut notes = Vec::new();
        let raw_d = if *lang == baseline {
            None
        } else {
            let mine: Vec<f64> = rows.iter().map(|s| s.ed_mean).collect();
            let base: Vec<f64> = by_lang
                .get(&baseline)
                .map(|b| b.iter().map(|s| s.ed_mean).collect())
                .unwrap_or_default();
            match cohens_d(&mine, &base) {
                Ok(d) => Some(d),
                Err(e) => {
                    notes.push(format!("raw d: {e}"));
                    None
                }
            }
        };
        let residualized = match (&contrasts, *lang == baseline) {
            (_, true) => None,
            (None, false) => {
                notes.push("residualized d needs prompt token counts on every row".into());
                None
            }
            (Some(Err(e)), false) => {
                notes.push(format!("residualized d: {e}"));
                None
            }
            (Some(Ok(list)), false) => match list.iter().find(|c| c.language == *lang) {
                Some(LanguageContrast {
                    residualized_d: Ok(d),
                    ..
                }) => Some(*d),
                Some(LanguageContrast {
                    residualized_d: Err(e),
                    ..
                }) => {
                    notes.push(format!("residualized d: {e}"));
                    None
                }
                None => None,
            },
        };
        out.push(LanguageReport {
            language: *lang,
            n,
            mean_ed,
            fertility: (!fert.is_empty()).then(|| fert.iter().sum::<f64>() / fert.len() as f64),
            vocab_allocation: profile.map(|p| vocab_allocation(p, default_scripts(*lang))),
            unique_tokens_per_generation: rows
                .iter()
                .map(|s| f64::from(s.unique_token_count))
                .sum::<f64>()
                / n as f64,
            cohens_d_vs_baseline: raw_d,
            residualized_cohens_d: residualized,
            notes,
        });
    }
    Ok(out)
}

/// Spearman correlation of fertility and mean ED across language means.
pub fn fertility_ed_spearman_means(reports: &[LanguageReport]) -> Result<TestResult> {
    let (f, e): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .filter_map(|r| Some((r.fertility?, r.mean_ed)))
        .unzip();
    Ok(spearman(&f, &e)?)
}

/// Spearman correlation of fertility and ED over individual generations.
pub fn fertility_ed_spearman_generations(summaries: &[GenerationSummary]) -> Result<TestResult> {
    let (f, e): (Vec<f64>, Vec<f64>) = summaries
        .iter()
        .filter_map(|s| {
            let t = s.row.prompt_token_count?;
            let c = s.row.prompt_char_count?;
            Some((fertility(t.into(), c.into()).ok()?, s.ed_mean))
        })
        .unzip();
    Ok(spearman(&f, &e)?)
}
