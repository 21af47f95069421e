//! Categorical labels shared across the manifest, prompts and analyses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Transformer,
    Ssm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptClass {
    Semantic,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptCategory {
    Wikipedia,
    News,
    Fiction,
    Code,
    Empty,
    RandomAscii,
    ExplicitRandomness,
    NeutralStub,
    NonsenseSyllables,
}

impl PromptCategory {
    pub const ALL: [PromptCategory; 9] = [
        PromptCategory::Wikipedia,
        PromptCategory::News,
        PromptCategory::Fiction,
        PromptCategory::Code,
        PromptCategory::Empty,
        PromptCategory::RandomAscii,
        PromptCategory::ExplicitRandomness,
        PromptCategory::NeutralStub,
        PromptCategory::NonsenseSyllables,
    ];

    pub const SEMANTIC: [PromptCategory; 4] = [
        PromptCategory::Wikipedia,
        PromptCategory::News,
        PromptCategory::Fiction,
        PromptCategory::Code,
    ];

    pub const NEUTRAL: [PromptCategory; 5] = [
        PromptCategory::Empty,
        PromptCategory::RandomAscii,
        PromptCategory::ExplicitRandomness,
        PromptCategory::NeutralStub,
        PromptCategory::NonsenseSyllables,
    ];

    pub fn class(self) -> PromptClass {
        if Self::SEMANTIC.contains(&self) {
            PromptClass::Semantic
        } else {
            PromptClass::Neutral
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptCategory::Wikipedia => "wikipedia",
            PromptCategory::News => "news",
            PromptCategory::Fiction => "fiction",
            PromptCategory::Code => "code",
            PromptCategory::Empty => "empty",
            PromptCategory::RandomAscii => "random_ascii",
            PromptCategory::ExplicitRandomness => "explicit_randomness",
            PromptCategory::NeutralStub => "neutral_stub",
            PromptCategory::NonsenseSyllables => "nonsense_syllables",
        }
    }
}

impl fmt::Display for PromptCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown prompt category '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "JA")]
    Ja,
    #[serde(rename = "ZH")]
    Zh,
    #[serde(rename = "PL")]
    Pl,
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "other")]
    Other,
}

impl Language {
    pub const ALL: [Language; 6] = [
        Language::En,
        Language::Ja,
        Language::Zh,
        Language::Pl,
        Language::Ar,
        Language::Other,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Ja => "JA",
            Language::Zh => "ZH",
            Language::Pl => "PL",
            Language::Ar => "AR",
            Language::Other => "other",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown language '{s}'"))
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transformer" => Ok(Architecture::Transformer),
            "ssm" => Ok(Architecture::Ssm),
            _ => Err(format!("unknown architecture '{s}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_categories_split_four_five() {
        assert_eq!(PromptCategory::ALL.len(), 9);
        let semantic = PromptCategory::ALL
            .iter()
            .filter(|c| c.class() == PromptClass::Semantic)
            .count();
        assert_eq!(semantic, 4);
        for c in PromptCategory::ALL {
            assert_eq!(c.as_str().parse::<PromptCategory>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
    }

    #[test]
    fn language_codes() {
        assert_eq!(serde_json::to_string(&Language::Pl).unwrap(), "\"PL\"");
        assert_eq!("ja".parse::<Language>().unwrap(), Language::Ja);
        assert!("xx".parse::<Language>().is_err());
    }
}
