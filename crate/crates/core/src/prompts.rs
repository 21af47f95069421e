//! Seeded prompt generation: five neutral generators and a loader for
//! user-supplied semantic corpora laid out as `corpus/<category>/<LANG>/*.txt`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{Language, PromptCategory, PromptClass};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{0} is not a neutral category")]
    NotNeutral(PromptCategory),
    #[error("{0} is not a semantic category")]
    NotSemantic(PromptCategory),
    #[error("length budget must be positive for {0}")]
    ZeroBudget(PromptCategory),
    #[error("corpus directory not found: {}", .0.display())]
    MissingCorpus(PathBuf),
    #[error("no .txt files in {}", .0.display())]
    EmptyCorpus(PathBuf),
    #[error("{} is not valid UTF-8", .0.display())]
    InvalidUtf8(PathBuf),
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub category: PromptCategory,
    pub language: Language,
    pub seed: u64,
    pub text: String,
    /// Prompt length in tokens, once a tokenizer has counted it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_token_count: Option<u64>,
    /// Corpus file an excerpt came from; always `None` for neutral prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
}

impl PromptSpec {
    /// Stable identifier used as `prompt_text_ref` in manifest rows.
    pub fn text_ref(&self) -> String {
        format!(
            "{}/{}/{}",
            self.category.as_str(),
            self.language.code(),
            self.seed
        )
    }

    /// Unicode scalar count of the text.
    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }
}

/// Consonant-vowel-consonant syllables, led by `bla mup ziq fon`.
pub const SYLLABLES: [&str; 32] = [
    "bla", "mup", "ziq", "fon", "dak", "rif", "tev", "gom", "lus", "pab", "kez", "vot", "nim",
    "sul", "hap", "wex", "jor", "bik", "teg", "muv", "pof", "dan", "lir", "sok", "gup", "zam",
    "fet", "rox", "kib", "nad", "vul", "hes",
];

pub const STUBS: [&str; 24] = [
    "The",
    "A",
    "It",
    "This",
    "There",
    "In",
    "One",
    "So",
    "And",
    "Then",
    "When",
    "Here",
    "What",
    "Some",
    "Now",
    "If",
    "We",
    "They",
    "Once",
    "After",
    "Every",
    "Today",
    "Its",
    "An",
];

pub const RANDOMNESS_TEMPLATES: [&str; 22] = [
    "Generate a completely random sequence of tokens",
    "Write random words with no meaning",
    "Produce a random string of characters",
    "Output random text",
    "Say anything at all, completely at random",
    "Type a sequence of random letters",
    "List random words in no particular order",
    "Continue with whatever random text comes to mind",
    "Produce gibberish",
    "Write a random jumble of symbols and words",
    "Emit random tokens until you stop",
    "Generate meaningless text",
    "Write something random",
    "Produce a random list of numbers and words",
    "Create a random sequence with no structure",
    "Print random characters",
    "Write nonsense",
    "Give me random output",
    "Generate noise in text form",
    "Output an arbitrary sequence of words",
    "Produce text with no topic and no pattern",
    "Write a sequence of unrelated random words",
];

const ASCII_LOW: u8 = 0x21;
const ASCII_HIGH: u8 = 0x7E;

fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

/// Generate a neutral prompt. Deterministic in `(category, seed, length_budget)`;
/// the budget caps the text length in characters.
pub fn gen_neutral(
    category: PromptCategory,
    seed: u64,
    length_budget: usize,
) -> Result<PromptSpec, PromptError> {
    if category.class() != PromptClass::Neutral {
        return Err(PromptError::NotNeutral(category));
    }
    if category != PromptCategory::Empty && length_budget == 0 {
        return Err(PromptError::ZeroBudget(category));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = match category {
        PromptCategory::Empty => String::new(),
        PromptCategory::RandomAscii => (0..length_budget)
            .map(|_| rng.random_range(ASCII_LOW..=ASCII_HIGH) as char)
            .collect(),
        PromptCategory::NonsenseSyllables => {
            let mut out = String::new();
            loop {
                let syl = SYLLABLES[rng.random_range(0..SYLLABLES.len())];
                let extra = usize::from(!out.is_empty()) + syl.len();
                if out.len() + extra > length_budget {
                    break;
                }
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(syl);
            }
            if out.is_empty() {
                truncate_chars(SYLLABLES[0], length_budget)
            } else {
                out
            }
        }
        PromptCategory::NeutralStub => {
            truncate_chars(STUBS[rng.random_range(0..STUBS.len())], length_budget)
        }
        PromptCategory::ExplicitRandomness => truncate_chars(
            RANDOMNESS_TEMPLATES[rng.random_range(0..RANDOMNESS_TEMPLATES.len())],
            length_budget,
        ),
        _ => unreachable!("class checked above"),
    };
    Ok(PromptSpec {
        category,
        language: Language::En,
        seed,
        text,
        estimated_token_count: None,
        source: None,
    })
}

/// Corpus files for one category and language, sorted by path.
pub fn corpus_files(
    corpus_dir: &Path,
    category: PromptCategory,
    language: Language,
) -> Result<Vec<PathBuf>, PromptError> {
    let dir = corpus_dir.join(category.as_str()).join(language.code());
    if !dir.is_dir() {
        return Err(PromptError::MissingCorpus(dir));
    }
    let entries = fs::read_dir(&dir).map_err(|source| PromptError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| PromptError::Io {
                path: dir.clone(),
                source,
            })?
            .path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(PromptError::EmptyCorpus(dir));
    }
    files.sort();
    Ok(files)
}

/// Load a semantic excerpt: file `seed mod n` of the sorted corpus files,
/// truncated to its leading `window` characters. Consecutive seeds therefore
/// walk the files in order.
pub fn load_semantic(
    category: PromptCategory,
    corpus_dir: &Path,
    language: Language,
    seed: u64,
    window: usize,
) -> Result<PromptSpec, PromptError> {
    if category.class() != PromptClass::Semantic {
        return Err(PromptError::NotSemantic(category));
    }
    let files = corpus_files(corpus_dir, category, language)?;
    let path = &files[(seed % files.len() as u64) as usize];
    let bytes = fs::read(path).map_err(|source| PromptError::Io {
        path: path.clone(),
        source,
    })?;
    let full = String::from_utf8(bytes).map_err(|_| PromptError::InvalidUtf8(path.clone()))?;
    Ok(PromptSpec {
        category,
        language,
        seed,
        text: truncate_chars(&full, window),
        estimated_token_count: None,
        source: Some(path.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_empty() {
        for seed in [0, 1, 99] {
            assert_eq!(gen_neutral(PromptCategory::Empty, seed, 0).unwrap().text, "");
        }
    }

    #[test]
    fn pools_contain_reference_examples() {
        assert_eq!(SYLLABLES[..4].join(" "), "bla mup ziq fon");
        assert!(STUBS.contains(&"The"));
        assert!(RANDOMNESS_TEMPLATES.contains(&"Generate a completely random sequence of tokens"));
        assert!(SYLLABLES.len() >= 20 && STUBS.len() >= 20 && RANDOMNESS_TEMPLATES.len() >= 20);
        for s in SYLLABLES {
            assert_eq!(s.len(), 3);
        }
    }

    #[test]
    fn deterministic_and_budgeted() {
        for cat in PromptCategory::NEUTRAL {
            let a = gen_neutral(cat, 42, 64).unwrap();
            assert_eq!(a, gen_neutral(cat, 42, 64).unwrap());
            assert!(a.char_count() <= 64);
            assert!(a.source.is_none());
        }
        let s = gen_neutral(PromptCategory::NonsenseSyllables, 3, 40).unwrap();
        assert!(s.text.split(' ').all(|w| SYLLABLES.contains(&w)));
        assert_eq!(gen_neutral(PromptCategory::RandomAscii, 1, 17).unwrap().char_count(), 17);
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(matches!(
            gen_neutral(PromptCategory::RandomAscii, 0, 0),
            Err(PromptError::ZeroBudget(_))
        ));
        assert!(matches!(
            gen_neutral(PromptCategory::Code, 0, 10),
            Err(PromptError::NotNeutral(_))
        ));
    }
}
