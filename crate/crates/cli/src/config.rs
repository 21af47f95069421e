//! Run configuration file, in TOML. Every key is optional and has a matching
//! command-line flag. When both are given the flag wins. Relative paths are
//! taken relative to the working directory.
//!
//! ```toml
//! manifest = "run/manifest.jsonl"
//! out = "run/out"
//! seed = 7
//! jobs = 8
//!
//! [prompts]
//! corpus = "corpus"
//! languages = ["EN", "JA", "ZH", "PL", "AR"]
//! temperatures = [0.7, 1.0, 1.3]
//! seeds_per_cell = 10
//! length_budget = 64
//! window = 512
//! model_name = "my-model"
//! architecture = "transformer"      # or "ssm"
//! param_count = 7000000000
//! vocab_size = 152064
//!
//! [summarize]
//! population_std = false
//!
//! [battery]
//! analyses = ["f1", "f4", "f7", "neutral_gradient"]
//! partition = "model_class"         # model | model_category | model_temperature | pooled
//! alpha = 0.05
//! baseline_language = "EN"
//! profile_granularity = "domain"    # domain_temperature | prompt
//! vocab = "vocab.tsv"
//!
//! [synth]                           # any synthetic-generator field
//! regime = "ssm_like"
//! generations_per_temperature = 30
//! vocab_size = 256
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use edprof::battery::{Analysis, PartitionScheme, ProfileGranularity};
use edprof::synth::SynthConfig;
use edprof::{Architecture, Language};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub prompts: PromptsSection,
    pub summarize: SummarizeSection,
    pub battery: BatterySection,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    pub corpus: Option<PathBuf>,
    pub languages: Option<Vec<Language>>,
    pub temperatures: Option<Vec<f64>>,
    pub seeds_per_cell: Option<u32>,
    pub length_budget: Option<usize>,
    pub window: Option<usize>,
    pub model_name: Option<String>,
    pub architecture: Option<Architecture>,
    pub param_count: Option<u64>,
    pub vocab_size: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeSection {
    pub population_std: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    pub analyses: Option<Vec<Analysis>>,
    pub partition: Option<PartitionScheme>,
    pub alpha: Option<f64>,
    pub baseline_language: Option<Language>,
    pub profile_granularity: Option<ProfileGranularity>,
    pub vocab: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| format!("{}\n", l.trim_start_matches("//!").trim_start()))
            .collect();
        let c = RunConfig::parse(&doc).unwrap();
        assert_eq!(c.jobs, Some(8));
        assert_eq!(c.battery.partition, Some(PartitionScheme::ModelClass));
        assert_eq!(c.battery.analyses.as_ref().unwrap()[3], Analysis::NeutralGradient);
        assert_eq!(c.prompts.languages.as_ref().unwrap().len(), 5);
        let synth = c.synth.unwrap();
        assert_eq!(synth.generations_per_temperature, 30);
        assert_eq!(synth.length, SynthConfig::default().length);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(RunConfig::parse("jobz = 3"), Err(CliError::Usage(_))));
        assert!(matches!(
            RunConfig::parse("[battery]\nanalyses = [\"f9\"]"),
            Err(CliError::Usage(_))
        ));
    }
}
