//! `battery`: runs the falsification battery over `summaries.jsonl`.
//!
//! Outputs `battery.json` and, when the Wikipedia rows of some model span two
//! or more languages, `multilingual.json` with per-language tokenizer reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use edprof::battery::{run_battery, BatteryConfig, BatteryReport, Outcome};
use edprof::multilingual::{
    fertility_ed_spearman_generations, fertility_ed_spearman_means, language_reports,
    LanguageReport, TokenizerProfile,
};
use edprof::stats::TestResult;
use edprof::{GenerationSummary, Language, PromptCategory};
use serde::{Deserialize, Serialize};

use super::{ensure_dir, read_summaries, write_json};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct BatteryOptions {
    pub summaries: PathBuf,
    pub out: PathBuf,
    pub config: BatteryConfig,
    /// Vocabulary file for script allocation in the multilingual reports.
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLanguages {
    pub model: String,
    pub baseline: Language,
    pub languages: Vec<LanguageReport>,
    /// Fertility vs ED over the per-language means.
    pub fertility_ed_spearman_means: Outcome<TestResult>,
    /// Fertility vs ED over individual generations.
    pub fertility_ed_spearman_generations: Outcome<TestResult>,
}

#[derive(Debug, Clone)]
pub struct BatteryOutput {
    pub report: BatteryReport,
    pub multilingual: Vec<ModelLanguages>,
}

fn outcome<T, E: ToString>(r: Result<T, E>) -> Outcome<T> {
    match r {
        Ok(result) => Outcome::Ran { result },
        Err(e) => Outcome::Skipped { reason: e.to_string() },
    }
}

/// Language reports per model over Wikipedia rows, the category F7 tests.
pub fn multilingual_reports(
    summaries: &[GenerationSummary],
    baseline: Language,
    profile: Option<&TokenizerProfile>,
) -> Vec<ModelLanguages> {
    let mut by_model: BTreeMap<&str, Vec<GenerationSummary>> = BTreeMap::new();
    for s in summaries.iter().filter(|s| s.row.prompt_category == PromptCategory::Wikipedia) {
        by_model.entry(&s.row.model_name).or_default().push(s.clone());
    }
    let mut out = Vec::new();
    for (model, rows) in by_model {
        let mut langs: Vec<Language> = rows.iter().map(|s| s.row.language).collect();
        langs.sort();
        langs.dedup();
        if langs.len() < 2 {
            continue;
        }
        let Ok(languages) = language_reports(&rows, baseline, profile) else { continue };
        out.push(ModelLanguages {
            model: model.to_string(),
            baseline,
            fertility_ed_spearman_means: outcome(fertility_ed_spearman_means(&languages)),
            fertility_ed_spearman_generations: outcome(fertility_ed_spearman_generations(&rows)),
            languages,
        });
    }
    out
}

pub fn cmd_battery(opts: &BatteryOptions) -> Result<BatteryOutput, CliError> {
    if opts.config.analyses.is_empty() {
        return Err(CliError::Usage("no analyses selected".into()));
    }
    let profile = match &opts.vocab {
        None => None,
        Some(path) => {
            let file = File::open(path).map_err(CliError::io(path))?;
            let p = TokenizerProfile::read(BufReader::new(file))
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            Some(p)
        }
    };
    let summaries = read_summaries(&opts.summaries)?;
    let report = run_battery(&summaries, &opts.config);
    let multilingual = multilingual_reports(&summaries, opts.config.baseline_language, profile.as_ref());
    ensure_dir(&opts.out)?;
    write_json(&opts.out.join("battery.json"), &report)?;
    let ml_path = opts.out.join("multilingual.json");
    if multilingual.is_empty() {
        if ml_path.exists() {
            std::fs::remove_file(&ml_path).map_err(CliError::io(&ml_path))?;
        }
    } else {
        write_json(&ml_path, &multilingual)?;
    }
    Ok(BatteryOutput { report, multilingual })
}
