//! `prompts`: expands the prompt suite into manifest rows for a capture run.
//!
//! Every neutral category is generated in English. Semantic categories are
//! loaded from `corpus/<category>/<LANG>/*.txt` for each requested language.
//! Each prompt is crossed with every temperature, so one language gives
//! `9 × temperatures × seeds_per_cell` rows.

use std::path::PathBuf;

use edprof::prompts::{gen_neutral, load_semantic, PromptSpec};
use edprof::{Architecture, Language, Manifest, ManifestRow, PromptCategory, PromptClass};

use super::{ensure_dir, write_jsonl};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct ModelInfo {
    pub name: String,
    pub architecture: Architecture,
    pub param_count: u64,
    pub vocab_size: u32,
}

#[derive(Debug, Clone)]
pub struct PromptsOptions {
    pub out: PathBuf,
    /// `None` restricts the suite to the neutral categories.
    pub corpus: Option<PathBuf>,
    pub languages: Vec<Language>,
    pub temperatures: Vec<f64>,
    pub seeds_per_cell: u32,
    /// First prompt seed; cell `k` uses `seed + k`.
    pub seed: u64,
    pub length_budget: usize,
    pub window: usize,
    pub model: ModelInfo,
}

#[derive(Debug, Clone)]
pub struct PromptSuite {
    pub manifest: Manifest,
    pub prompts: Vec<PromptSpec>,
}

fn prompt_for(opts: &PromptsOptions, category: PromptCategory, language: Language, seed: u64) -> Result<PromptSpec, CliError> {
    Ok(match category.class() {
        PromptClass::Neutral => gen_neutral(category, seed, opts.length_budget)?,
        PromptClass::Semantic => {
            let corpus = opts.corpus.as_deref().expect("semantic categories need a corpus");
            load_semantic(category, corpus, language, seed, opts.window)?
        }
    })
}

/// Builds the suite in memory without touching the output directory.
pub fn build_suite(opts: &PromptsOptions) -> Result<PromptSuite, CliError> {
    if opts.temperatures.is_empty() || opts.seeds_per_cell == 0 {
        return Err(CliError::Usage("need at least one temperature and one seed per cell".into()));
    }
    if opts.languages.is_empty() {
        return Err(CliError::Usage("need at least one language".into()));
    }
    let mut prompts = Vec::new();
    let mut rows = Vec::new();
    for category in PromptCategory::ALL {
        let languages: &[Language] = match category.class() {
            PromptClass::Neutral => &[Language::En],
            PromptClass::Semantic if opts.corpus.is_none() => &[],
            PromptClass::Semantic => &opts.languages,
        };
        for &language in languages {
            for k in 0..opts.seeds_per_cell {
                let seed = opts.seed + u64::from(k);
                let spec = prompt_for(opts, category, language, seed)?;
                for &temperature in &opts.temperatures {
                    let generation_index = rows.len() as u32;
                    rows.push(ManifestRow {
                        model_name: opts.model.name.clone(),
                        architecture: opts.model.architecture,
                        param_count: opts.model.param_count,
                        vocab_size: opts.model.vocab_size,
                        prompt_category: category,
                        prompt_text_ref: spec.text_ref(),
                        language,
                        temperature,
                        seed,
                        generation_index,
                        stream_path: format!("streams/gen_{generation_index:05}.edls"),
                        prompt_token_count: None,
                        prompt_char_count: Some(spec.char_count() as u32),
                        quantization: None,
                        chat_template: None,
                    });
                }
                prompts.push(spec);
            }
        }
    }
    Ok(PromptSuite {
        manifest: Manifest::new(rows)?,
        prompts,
    })
}

/// Writes `manifest.jsonl` and `prompts.jsonl` under `opts.out`.
pub fn cmd_prompts(opts: &PromptsOptions) -> Result<PromptSuite, CliError> {
    let suite = build_suite(opts)?;
    ensure_dir(&opts.out)?;
    suite.manifest.write_jsonl(&opts.out.join("manifest.jsonl"))?;
    write_jsonl(&opts.out.join("prompts.jsonl"), &suite.prompts)?;
    Ok(suite)
}
