//! Planted-regime generators with known ground truth, for validating the
//! pipeline without a model.
//!
//! Stream generation plants a per-generation mean ED and a per-position ED
//! trajectory, then writes two-level logit vectors (one token at logit `a`,
//! the rest at 0) whose ED after temperature scaling hits each planted
//! value. The trajectory is centred and rescaled so a generation's sample
//! mean and standard deviation equal their planted values exactly.
//!
//! [`plant_summaries`] skips streams entirely and draws summary rows, for
//! battery fixtures at sizes where writing streams would be wasteful.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::ManifestRow;
use crate::metrics::ed_from_entropy;
use crate::stream::{StreamError, StreamHeader, StreamWriter, ValueKind, ValueWidth};
use crate::summary::GenerationSummary;
use crate::taxonomy::{Architecture, Language, PromptCategory};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Flat in temperature, moderate ED, high within-sequence spread.
    TransformerLike,
    /// ED declining linearly in temperature, low within-sequence spread.
    SsmLike,
}

impl Regime {
    pub const SSM_ENDPOINTS: [(f64, f64); 2] = [(0.7, 0.796), (1.3, 0.440)];
    pub const TRANSFORMER_LEVEL: f64 = 0.31;

    /// Planted mean ED at temperature `t`.
    pub fn level(self, t: f64) -> f64 {
        match self {
            Regime::TransformerLike => Self::TRANSFORMER_LEVEL,
            Regime::SsmLike => {
                let [(t0, e0), (t1, e1)] = Self::SSM_ENDPOINTS;
                (e0 + (t - t0) / (t1 - t0) * (e1 - e0)).clamp(0.02, 0.98)
            }
        }
    }

    pub fn default_position_sd(self) -> f64 {
        match self {
            Regime::TransformerLike => 0.12,
            Regime::SsmLike => 0.04,
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Regime::TransformerLike => Architecture::Transformer,
            Regime::SsmLike => Architecture::Ssm,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::TransformerLike => "transformer_like",
            Regime::SsmLike => "ssm_like",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, SynthError> {
        match s {
            "transformer_like" => Ok(Regime::TransformerLike),
            "ssm_like" => Ok(Regime::SsmLike),
            other => Err(SynthError::InvalidParam(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub regime: Regime,
    pub model_name: String,
    pub param_count: u64,
    pub vocab_size: u32,
    /// Positions per generation.
    pub length: u32,
    pub temperatures: Vec<f64>,
    pub generations_per_temperature: u32,
    /// Spread of generation means around the regime level.
    pub generation_sd: f64,
    /// Within-generation sample sd of per-position ED; regime default if absent.
    pub position_sd: Option<f64>,
    /// AR(1) coefficient of the per-position deviations.
    pub ar_coefficient: f64,
    /// Added to each generation mean per unit of generation index.
    pub drift_per_generation: f64,
    pub value_width: ValueWidth,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::new(Regime::SsmLike)
    }
}

impl SynthConfig {
    pub fn new(regime: Regime) -> Self {
        let (model_name, param_count) = match regime {
            Regime::TransformerLike => ("synthetic-transformer", 7_000_000_000),
            Regime::SsmLike => ("synthetic-ssm", 2_700_000_000),
        };
        SynthConfig {
            regime,
            model_name: model_name.to_string(),
            param_count,
            vocab_size: 256,
            length: 48,
            temperatures: vec![0.7, 1.0, 1.3],
            generations_per_temperature: 30,
            generation_sd: 0.01,
            position_sd: None,
            ar_coefficient: 0.0,
            drift_per_generation: 0.0,
            value_width: ValueWidth::Binary32,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParam(m));
        if self.vocab_size < 2 {
            return bad(format!("vocab_size {} < 2", self.vocab_size));
        }
        if self.length == 0 {
            return bad("length must be positive".into());
        }
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("temperatures must be non-empty and positive".into());
        }
        if self.generations_per_temperature == 0 {
            return bad("generations_per_temperature must be positive".into());
        }
        if !(self.generation_sd >= 0.0) || self.position_sd.is_some_and(|s| !(s >= 0.0)) {
            return bad("standard deviations must be non-negative".into());
        }
        if !(self.ar_coefficient.abs() < 1.0) {
            return bad("ar_coefficient must lie in (-1, 1)".into());
        }
        Ok(())
    }

    pub fn position_sd(&self) -> f64 {
        self.position_sd
            .unwrap_or_else(|| self.regime.default_position_sd())
    }
}

/// One planned generation: its manifest row and planted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedGeneration {
    pub row: ManifestRow,
    pub planted_mean: f64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Lays out the run: temperatures outermost, categories round-robin, one
/// stream per row at `streams/gen_<index>.edls`.
pub fn plan(config: &SynthConfig) -> Result<Vec<PlannedGeneration>, SynthError> {
    config.validate()?;
    let mut rng = rng_for(config.seed, u64::MAX);
    let noise = Normal::new(0.0, config.generation_sd)
        .map_err(|e| SynthError::InvalidParam(e.to_string()))?;
    let mut out = Vec::new();
    let mut index = 0u32;
    for &t in &config.temperatures {
        for _ in 0..config.generations_per_temperature {
            let category = PromptCategory::ALL[index as usize % PromptCategory::ALL.len()];
            let seed = config.seed.wrapping_add(u64::from(index));
            let mean = config.regime.level(t)
                + config.drift_per_generation * f64::from(index)
                + noise.sample(&mut rng);
            out.push(PlannedGeneration {
                row: ManifestRow {
                    model_name: config.model_name.clone(),
                    architecture: config.regime.architecture(),
                    param_count: config.param_count,
                    vocab_size: config.vocab_size,
                    prompt_category: category,
                    prompt_text_ref: format!("{}/{}/{}", category.as_str(), Language::En.code(), seed),
                    language: Language::En,
                    temperature: t,
                    seed,
                    generation_index: index,
                    stream_path: format!("streams/gen_{index:05}.edls"),
                    prompt_token_count: None,
                    prompt_char_count: None,
                    quantization: None,
                    chat_template: None,
                },
                planted_mean: mean.clamp(0.02, 0.98),
            });
            index += 1;
        }
    }
    Ok(out)
}

/// ED of the two-level distribution with scaled logit gap `b` (one token at
/// `b`, `V − 1` at 0).
fn two_level_ed(b: f64, vocab: usize) -> f64 {
    let rest = (vocab - 1) as f64;
    // log-space with the larger logit as reference
    let z = 1.0 + rest * (-b).exp();
    let lnz = z.ln();
    let p0 = 1.0 / z;
    let q = (-b).exp() / z;
    let h = -(p0 * -lnz) - rest * q * (-b - lnz);
    ed_from_entropy(h, vocab)
}

/// Scaled gap `b ≥ 0` whose two-level distribution has ED `target`.
pub fn gap_for_ed(target: f64, vocab: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while two_level_ed(hi, vocab) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if two_level_ed(mid, vocab) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Per-position ED trajectory with exact sample mean `mean` and sample sd
/// `sd`, every value inside `[0.005, 0.995]`.
pub fn planted_trajectory(
    rng: &mut ChaCha8Rng,
    length: usize,
    mean: f64,
    sd: f64,
    ar: f64,
) -> Result<Vec<f64>, SynthError> {
    if length < 2 || sd == 0.0 {
        return Ok(vec![mean; length]);
    }
    for _ in 0..10_000 {
        let mut u = Vec::with_capacity(length);
        let mut prev = 0.0;
        for _ in 0..length {
            let e: f64 = StandardNormal.sample(rng);
            prev = ar * prev + e;
            u.push(prev);
        }
        let m = u.iter().sum::<f64>() / length as f64;
        let s = (u.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (length - 1) as f64).sqrt();
        if s == 0.0 {
            continue;
        }
        let x: Vec<f64> = u.iter().map(|v| mean + sd * (v - m) / s).collect();
        if x.iter().all(|v| (0.005..=0.995).contains(v)) {
            return Ok(x);
        }
    }
    Err(SynthError::InvalidParam(format!(
        "no trajectory with mean {mean} and sd {sd} fits inside (0, 1)"
    )))
}

/// Writes the planted stream for one generation; returns the sink and the
/// number of bytes written.
pub fn write_generation<W: Write>(
    config: &SynthConfig,
    planned: &PlannedGeneration,
    sink: W,
) -> Result<(W, u64), SynthError> {
    let row = &planned.row;
    let vocab = config.vocab_size as usize;
    let t = row.temperature;
    let mut rng = rng_for(config.seed, u64::from(row.generation_index));
    let traj = planted_trajectory(
        &mut rng,
        config.length as usize,
        planned.planted_mean,
        config.position_sd(),
        config.ar_coefficient,
    )?;
    let header = StreamHeader::new(config.vocab_size, ValueKind::RawLogits, config.value_width)
        .with_generation_id(format!("{}#{}", row.model_name, row.generation_index))
        .with_digest(row.digest())
        .with_position_count_hint(config.length);
    let mut writer = StreamWriter::new(header, sink)?;
    let mut logits = vec![0.0f64; vocab];
    for (pos, &target) in traj.iter().enumerate() {
        let peak = rng.random_range(0..vocab);
        let b = gap_for_ed(target, vocab);
        logits[peak] = b * t;
        // sample from the planted distribution
        let p_peak = 1.0 / (1.0 + (vocab - 1) as f64 * (-b).exp());
        let token = if rng.random::<f64>() < p_peak {
            peak
        } else {
            let other = rng.random_range(0..vocab - 1);
            if other >= peak {
                other + 1
            } else {
                other
            }
        };
        match config.value_width {
            ValueWidth::Binary64 => writer.write_values(pos as u32, token as u32, &logits)?,
            ValueWidth::Binary32 => {
                let narrow: Vec<f32> = logits.iter().map(|&v| v as f32).collect();
                writer.write_values(pos as u32, token as u32, &narrow)?
            }
        }
        logits[peak] = 0.0;
    }
    Ok(writer.finish()?)
}

/// A cell of planted summary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPlant {
    pub model_name: String,
    pub architecture: Architecture,
    pub param_count: u64,
    pub category: PromptCategory,
    pub language: Language,
    pub temperature: f64,
    pub mean: f64,
    /// Spread of `ed_mean` across the cell's rows.
    pub sd: f64,
    pub count: usize,
}

impl SummaryPlant {
    pub fn new(model_name: &str, category: PromptCategory, mean: f64, sd: f64, count: usize) -> Self {
        SummaryPlant {
            model_name: model_name.to_string(),
            architecture: Architecture::Transformer,
            param_count: 7_000_000_000,
            category,
            language: Language::En,
            temperature: 1.0,
            mean,
            sd,
            count,
        }
    }

    pub fn language(mut self, l: Language) -> Self {
        self.language = l;
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn architecture(mut self, a: Architecture, params: u64) -> Self {
        self.architecture = a;
        self.param_count = params;
        self
    }
}

/// Summary rows drawn cell by cell in order; generation indices run
/// consecutively across cells and `drift` is added per unit of index.
/// Within a cell, seeds count up from zero.
pub fn plant_summaries(plants: &[SummaryPlant], drift: f64, seed: u64) -> Vec<GenerationSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut index = 0u32;
    for p in plants {
        for k in 0..p.count {
            let z: f64 = StandardNormal.sample(&mut rng);
            let ed_mean = p.mean + p.sd * z + drift * f64::from(index);
            let row = ManifestRow {
                model_name: p.model_name.clone(),
                architecture: p.architecture,
                param_count: p.param_count,
                vocab_size: 256,
                prompt_category: p.category,
                prompt_text_ref: format!("{}/{}/{k}", p.category.as_str(), p.language.code()),
                language: p.language,
                temperature: p.temperature,
                seed: k as u64,
                generation_index: index,
                stream_path: String::new(),
                prompt_token_count: None,
                prompt_char_count: None,
                quantization: None,
                chat_template: None,
            };
            out.push(GenerationSummary {
                row,
                ed_mean,
                ed_std: 0.0,
                length: 1,
                unique_token_count: 1,
                mean_entropy: 0.0,
                durbin_watson: None,
            });
            index += 1;
        }
    }
    out
}
