//! The falsification battery (F1–F8) and the headline analyses run over a
//! set of [`GenerationSummary`] rows.
//!
//! Every section is either run or skipped with a recorded reason; a section
//! that runs reports one entry per partition (usually per model), and each
//! partition entry may itself be skipped. The report is a pure function of
//! the summaries and the [`BatteryConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{
    anova_oneway, cohens_d, dw_band, kruskal_wallis, mann_whitney_u, ols, pearson, spearman,
    t_one_sample, t_paired, tukey_hsd, DwBand, RegressionFit, StatsError, TestResult,
};
use crate::summary::GenerationSummary;
use crate::taxonomy::{Architecture, Language, PromptCategory, PromptClass};

#[derive(Debug, Error, PartialEq)]
pub enum BatteryError {
    #[error("unknown analysis {0:?}")]
    UnknownAnalysis(String),
    #[error("unknown partition scheme {0:?}")]
    UnknownPartition(String),
    #[error("unknown profile granularity {0:?}")]
    UnknownGranularity(String),
    #[error("no analyses selected")]
    NoAnalyses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    NeutralGradient,
    DomainProfile,
}

impl Analysis {
    pub const ALL: [Analysis; 10] = [
        Analysis::F1,
        Analysis::F2,
        Analysis::F3,
        Analysis::F4,
        Analysis::F5,
        Analysis::F6,
        Analysis::F7,
        Analysis::F8,
        Analysis::NeutralGradient,
        Analysis::DomainProfile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::F1 => "f1",
            Analysis::F2 => "f2",
            Analysis::F3 => "f3",
            Analysis::F4 => "f4",
            Analysis::F5 => "f5",
            Analysis::F6 => "f6",
            Analysis::F7 => "f7",
            Analysis::F8 => "f8",
            Analysis::NeutralGradient => "neutral_gradient",
            Analysis::DomainProfile => "domain_profile",
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Analysis {
    type Err = BatteryError;
    fn from_str(s: &str) -> Result<Self, BatteryError> {
        let lower = s.to_ascii_lowercase();
        Analysis::ALL
            .into_iter()
            .find(|a| a.as_str() == lower)
            .ok_or_else(|| BatteryError::UnknownAnalysis(s.to_string()))
    }
}

/// How F1 splits the summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    /// One partition per (model, prompt class).
    #[default]
    ModelClass,
    Model,
    ModelCategory,
    ModelTemperature,
    Pooled,
}

impl PartitionScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionScheme::ModelClass => "model_class",
            PartitionScheme::Model => "model",
            PartitionScheme::ModelCategory => "model_category",
            PartitionScheme::ModelTemperature => "model_temperature",
            PartitionScheme::Pooled => "pooled",
        }
    }

    fn label(self, s: &GenerationSummary) -> String {
        let model = &s.row.model_name;
        match self {
            PartitionScheme::ModelClass => {
                let class = match s.row.prompt_category.class() {
                    PromptClass::Semantic => "semantic",
                    PromptClass::Neutral => "neutral",
                };
                format!("{model}/{class}")
            }
            PartitionScheme::Model => model.clone(),
            PartitionScheme::ModelCategory => format!("{model}/{}", s.row.prompt_category),
            PartitionScheme::ModelTemperature => format!("{model}/T={}", s.row.temperature),
            PartitionScheme::Pooled => "all".to_string(),
        }
    }
}

impl FromStr for PartitionScheme {
    type Err = BatteryError;
    fn from_str(s: &str) -> Result<Self, BatteryError> {
        [
            PartitionScheme::ModelClass,
            PartitionScheme::Model,
            PartitionScheme::ModelCategory,
            PartitionScheme::ModelTemperature,
            PartitionScheme::Pooled,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| BatteryError::UnknownPartition(s.to_string()))
    }
}

/// Key granularity of the per-model profiles correlated across models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileGranularity {
    /// Mean per semantic category.
    #[default]
    Domain,
    /// Mean per (semantic category, temperature).
    DomainTemperature,
    /// Mean per semantic prompt reference.
    Prompt,
}

impl FromStr for ProfileGranularity {
    type Err = BatteryError;
    fn from_str(s: &str) -> Result<Self, BatteryError> {
        match s {
            "domain" => Ok(ProfileGranularity::Domain),
            "domain_temperature" => Ok(ProfileGranularity::DomainTemperature),
            "prompt" => Ok(ProfileGranularity::Prompt),
            other => Err(BatteryError::UnknownGranularity(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub analyses: Vec<Analysis>,
    pub partition: PartitionScheme,
    pub alpha: f64,
    pub baseline_language: Language,
    pub profile_granularity: ProfileGranularity,
    /// Architecture whose models enter the profile matrix; all when `None`.
    pub profile_architecture: Option<Architecture>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            analyses: Analysis::ALL.to_vec(),
            partition: PartitionScheme::default(),
            alpha: 0.05,
            baseline_language: Language::En,
            profile_granularity: ProfileGranularity::default(),
            profile_architecture: Some(Architecture::Transformer),
        }
    }
}

impl BatteryConfig {
    pub fn with_analyses(mut self, analyses: Vec<Analysis>) -> Result<Self, BatteryError> {
        if analyses.is_empty() {
            return Err(BatteryError::NoAnalyses);
        }
        self.analyses = analyses;
        Ok(self)
    }

    fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome<T> {
    Ran { result: T },
    Skipped { reason: String },
}

impl<T> Outcome<T> {
    fn skip(reason: impl Into<String>) -> Self {
        Outcome::Skipped {
            reason: reason.into(),
        }
    }

    pub fn result(&self) -> Option<&T> {
        match self {
            Outcome::Ran { result } => Some(result),
            Outcome::Skipped { .. } => None,
        }
    }

    pub fn skip_reason(&self) -> Option<&str> {
        match self {
            Outcome::Ran { .. } => None,
            Outcome::Skipped { reason } => Some(reason),
        }
    }
}

impl<T> From<Result<T, StatsError>> for Outcome<T> {
    fn from(r: Result<T, StatsError>) -> Self {
        match r {
            Ok(result) => Outcome::Ran { result },
            Err(e) => Outcome::skip(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partitioned<T> {
    pub partition: String,
    /// Summaries in this partition.
    pub n: usize,
    pub outcome: Outcome<T>,
}

pub type Sectioned<T> = Outcome<Vec<Partitioned<T>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub label: String,
    pub n: usize,
    pub mean: f64,
}

/// A pairwise comparison with readable group labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    /// `mean(b) − mean(a)`.
    pub mean_difference: f64,
    pub result: TestResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTest {
    pub kruskal_wallis: TestResult,
    /// Highest mean first.
    pub ranking: Vec<GroupMean>,
    pub tukey: Vec<LabeledPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub model: String,
    pub param_count: u64,
    pub mean_ed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRegression {
    pub points: Vec<ModelPoint>,
    /// `mean_ed ~ ln(param_count)`.
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMean {
    pub temperature: f64,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureAnalysis {
    pub levels: Vec<LevelMean>,
    pub anova: Option<TestResult>,
    /// Pearson r over individual rows `(T, ed_mean)`.
    pub pearson_rows: Option<TestResult>,
    /// Pearson r over level means; needs three or more levels.
    pub pearson_levels: Option<TestResult>,
    pub tukey: Vec<LabeledPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TemperatureAnalysis {
    pub fn all_pairs_significant(&self) -> bool {
        !self.tukey.is_empty() && self.tukey.iter().all(|p| p.significant)
    }

    pub fn any_pair_significant(&self) -> bool {
        self.tukey.iter().any(|p| p.significant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub positive_band: usize,
    pub no_band: usize,
    pub negative_band: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicFraction {
    pub neutral_mean: f64,
    pub semantic_mean: f64,
    pub fraction: f64,
    pub neutral_categories: usize,
    pub semantic_categories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilingualTest {
    pub kruskal_wallis: TestResult,
    /// Lowest mean first.
    pub languages: Vec<GroupMean>,
    pub mann_whitney: Vec<LabeledPair>,
    pub cohens_d_vs_baseline: Vec<(String, Option<f64>)>,
}

impl MultilingualTest {
    pub fn order(&self) -> Vec<&str> {
        self.languages.iter().map(|g| g.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    /// Predictor names in coefficient order after the intercept.
    pub predictors: Vec<String>,
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutralGradient {
    /// Lowest mean first.
    pub categories: Vec<GroupMean>,
    /// `random_ascii − empty`, matched on (temperature, seed).
    pub random_vs_empty: Option<TestResult>,
    pub tukey: Vec<LabeledPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl NeutralGradient {
    pub fn order(&self) -> Vec<&str> {
        self.categories.iter().map(|g| g.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMatrix {
    pub granularity: ProfileGranularity,
    pub models: Vec<String>,
    pub keys: Vec<String>,
    /// Spearman ρ; `None` where a profile is constant.
    pub rho: Vec<Vec<Option<f64>>>,
}

impl ProfileMatrix {
    /// Smallest and largest off-diagonal ρ.
    pub fn off_diagonal_range(&self) -> Option<(f64, f64)> {
        let mut vals = Vec::new();
        for (i, row) in self.rho.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                if i < j {
                    vals.extend(*r);
                }
            }
        }
        let lo = vals.iter().copied().reduce(f64::min)?;
        let hi = vals.iter().copied().reduce(f64::max)?;
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub input_count: usize,
    pub config: BatteryConfig,
    pub f1_nonzero: Sectioned<TestResult>,
    pub f2_domains: Sectioned<DomainTest>,
    pub f3_size_effect: Outcome<SizeRegression>,
    pub f4_temperature: Sectioned<TemperatureAnalysis>,
    pub f5_autocorrelation: Sectioned<DwSummary>,
    pub f6_intrinsic_fraction: Sectioned<IntrinsicFraction>,
    pub f7_multilingual: Sectioned<MultilingualTest>,
    pub f8_drift: Sectioned<DriftFit>,
    pub neutral_gradient: Sectioned<NeutralGradient>,
    pub domain_profiles: Outcome<ProfileMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

type Rows<'a> = Vec<&'a GenerationSummary>;

fn group_by<'a, K: Ord>(
    rows: &[&'a GenerationSummary],
    key: impl Fn(&GenerationSummary) -> K,
) -> BTreeMap<K, Rows<'a>> {
    let mut out: BTreeMap<K, Rows<'a>> = BTreeMap::new();
    for s in rows {
        out.entry(key(s)).or_default().push(s);
    }
    out
}

fn ed_values(rows: &[&GenerationSummary]) -> Vec<f64> {
    rows.iter().map(|s| s.ed_mean).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Temperatures ordered numerically; bit patterns of positive floats sort
/// the same way as their values.
fn temperature_key(t: f64) -> u64 {
    t.to_bits()
}

fn by_model<'a>(rows: &[&'a GenerationSummary]) -> BTreeMap<String, Rows<'a>> {
    group_by(rows, |s| s.row.model_name.clone())
}

/// Runs `f` per model and wraps the results, skipping the section when
/// there is nothing to partition.
fn per_model<'a, T>(
    rows: &[&'a GenerationSummary],
    f: impl Fn(&[&'a GenerationSummary]) -> Outcome<T>,
) -> Sectioned<T> {
    if rows.is_empty() {
        return Outcome::skip("no summaries");
    }
    let parts = by_model(rows)
        .into_iter()
        .map(|(model, group)| Partitioned {
            partition: model,
            n: group.len(),
            outcome: f(&group),
        })
        .collect();
    Outcome::Ran { result: parts }
}

fn labeled_tukey(labels: &[String], groups: &[Vec<f64>], alpha: f64) -> Result<Vec<LabeledPair>, StatsError> {
    let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
    Ok(tukey_hsd(&refs, alpha)?
        .into_iter()
        .map(|p| LabeledPair {
            a: labels[p.a].clone(),
            b: labels[p.b].clone(),
            mean_difference: p.mean_difference,
            result: p.result,
            significant: p.significant,
        })
        .collect())
}

/// F1: one-sample t of `ed_mean` against 0 in each partition.
pub fn f1_nonzero(summaries: &[GenerationSummary], scheme: PartitionScheme) -> Sectioned<TestResult> {
    let rows: Rows = summaries.iter().collect();
    if rows.is_empty() {
        return Outcome::skip("no summaries");
    }
    let parts = group_by(&rows, |s| scheme.label(s))
        .into_iter()
        .map(|(label, group)| {
            let outcome = if group.len() < 2 {
                Outcome::skip("fewer than two summaries")
            } else {
                t_one_sample(&ed_values(&group), 0.0).into()
            };
            Partitioned {
                partition: label,
                n: group.len(),
                outcome,
            }
        })
        .collect();
    Outcome::Ran { result: parts }
}

/// F2: Kruskal–Wallis across semantic domains per model, Tukey post-hoc.
pub fn f2_domains(summaries: &[GenerationSummary], alpha: f64) -> Sectioned<DomainTest> {
    let rows: Rows = summaries
        .iter()
        .filter(|s| s.row.prompt_category.class() == PromptClass::Semantic)
        .collect();
    per_model(&rows, |group| {
        let domains = group_by(group, |s| s.row.prompt_category);
        if domains.len() < 2 {
            return Outcome::skip("fewer than two domains");
        }
        let labels: Vec<String> = domains.keys().map(|c| c.to_string()).collect();
        let values: Vec<Vec<f64>> = domains.values().map(|g| ed_values(g)).collect();
        let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
        let kw = match kruskal_wallis(&refs) {
            Ok(kw) => kw,
            Err(e) => return Outcome::skip(e.to_string()),
        };
        let mut ranking: Vec<GroupMean> = labels
            .iter()
            .zip(&values)
            .map(|(l, v)| GroupMean {
                label: l.clone(),
                n: v.len(),
                mean: mean(v),
            })
            .collect();
        ranking.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        let mut notes = Vec::new();
        let tukey = labeled_tukey(&labels, &values, alpha).unwrap_or_else(|e| {
            notes.push(format!("post-hoc: {e}"));
            Vec::new()
        });
        Outcome::Ran {
            result: DomainTest {
                kruskal_wallis: kw,
                ranking,
                tukey,
                notes,
            },
        }
    })
}

/// F3: regression of per-model mean ED (semantic prompts) on
/// `ln(param_count)`, transformer models only.
pub fn f3_size_effect(summaries: &[GenerationSummary]) -> Outcome<SizeRegression> {
    let rows: Rows = summaries
        .iter()
        .filter(|s| {
            s.row.architecture == Architecture::Transformer
                && s.row.prompt_category.class() == PromptClass::Semantic
        })
        .collect();
    let points: Vec<ModelPoint> = by_model(&rows)
        .into_iter()
        .map(|(model, group)| ModelPoint {
            model,
            param_count: group[0].row.param_count,
            mean_ed: mean(&ed_values(&group)),
        })
        .collect();
    if points.len() < 2 {
        return Outcome::skip("fewer than two transformer models with semantic summaries");
    }
    let y: Vec<f64> = points.iter().map(|p| p.mean_ed).collect();
    let x: Vec<f64> = points.iter().map(|p| (p.param_count as f64).ln()).collect();
    match ols(&y, &[&x], true) {
        Ok(fit) => Outcome::Ran {
            result: SizeRegression { points, fit },
        },
        Err(e) => Outcome::skip(e.to_string()),
    }
}

/// F4: ANOVA over temperature levels, Pearson r and Tukey post-hoc, per model.
pub fn f4_temperature(summaries: &[GenerationSummary], alpha: f64) -> Sectioned<TemperatureAnalysis> {
    let rows: Rows = summaries.iter().collect();
    per_model(&rows, |group| temperature_analysis(group, alpha))
}

fn temperature_analysis(group: &[&GenerationSummary], alpha: f64) -> Outcome<TemperatureAnalysis> {
    let levels = group_by(group, |s| temperature_key(s.row.temperature));
    if levels.len() < 2 {
        return Outcome::skip("single temperature level");
    }
    let temps: Vec<f64> = levels.keys().map(|k| f64::from_bits(*k)).collect();
    let values: Vec<Vec<f64>> = levels.values().map(|g| ed_values(g)).collect();
    let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
    let level_means: Vec<LevelMean> = temps
        .iter()
        .zip(&values)
        .map(|(t, v)| LevelMean {
            temperature: *t,
            n: v.len(),
            mean: mean(v),
        })
        .collect();
    let mut notes = Vec::new();
    let mut keep = |name: &str, r: Result<TestResult, StatsError>| match r {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let anova = keep("anova", anova_oneway(&refs));
    let t_rows: Vec<f64> = group.iter().map(|s| s.row.temperature).collect();
    let pearson_rows = keep("pearson over rows", pearson(&t_rows, &ed_values(group)));
    let pearson_levels = if temps.len() >= 3 {
        let m: Vec<f64> = level_means.iter().map(|l| l.mean).collect();
        keep("pearson over levels", pearson(&temps, &m))
    } else {
        None
    };
    let labels: Vec<String> = temps.iter().map(|t| format!("T={t}")).collect();
    let tukey = match labeled_tukey(&labels, &values, alpha) {
        Ok(t) => t,
        Err(e) => {
            notes.push(format!("tukey: {e}"));
            Vec::new()
        }
    };
    Outcome::Ran {
        result: TemperatureAnalysis {
            levels: level_means,
            anova,
            pearson_rows,
            pearson_levels,
            tukey,
            notes,
        },
    }
}

/// Durbin–Watson of one per-position ED series after removing its mean.
pub fn f5_series(per_position_ed: &[f64]) -> Result<TestResult, StatsError> {
    if per_position_ed.len() < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            got: per_position_ed.len(),
        });
    }
    let m = mean(per_position_ed);
    let centred: Vec<f64> = per_position_ed.iter().map(|v| v - m).collect();
    crate::stats::durbin_watson(&centred)
}

/// F5: distribution of per-generation Durbin–Watson statistics, per model.
pub fn f5_autocorrelation(summaries: &[GenerationSummary]) -> Sectioned<DwSummary> {
    let rows: Rows = summaries.iter().collect();
    per_model(&rows, |group| {
        let mut dw: Vec<f64> = group.iter().filter_map(|s| s.durbin_watson).collect();
        if dw.is_empty() {
            return Outcome::skip("no generation has a Durbin-Watson statistic");
        }
        dw.sort_by(f64::total_cmp);
        let n = dw.len();
        let median = if n % 2 == 1 {
            dw[n / 2]
        } else {
            0.5 * (dw[n / 2 - 1] + dw[n / 2])
        };
        let count = |b: DwBand| dw.iter().filter(|&&d| dw_band(d) == b).count();
        Outcome::Ran {
            result: DwSummary {
                n,
                mean: mean(&dw),
                median,
                min: dw[0],
                max: dw[n - 1],
                positive_band: count(DwBand::Positive),
                no_band: count(DwBand::None),
                negative_band: count(DwBand::Negative),
            },
        }
    })
}

/// Neutral mean ED as a fraction of semantic mean ED.
pub fn intrinsic_fraction(neutral_mean: f64, semantic_mean: f64) -> Option<f64> {
    (semantic_mean > 0.0).then(|| neutral_mean / semantic_mean)
}

/// Unweighted mean of per-category means.
fn category_mean(rows: &[&GenerationSummary]) -> (f64, usize) {
    let cats = group_by(rows, |s| s.row.prompt_category);
    let means: Vec<f64> = cats.values().map(|g| mean(&ed_values(g))).collect();
    (mean(&means), means.len())
}

/// F6: intrinsic fraction per model.
pub fn f6_intrinsic_fraction(summaries: &[GenerationSummary]) -> Sectioned<IntrinsicFraction> {
    let rows: Rows = summaries.iter().collect();
    per_model(&rows, |group| {
        let (neutral, semantic): (Rows, Rows) = group
            .iter()
            .partition(|s| s.row.prompt_category.class() == PromptClass::Neutral);
        if neutral.is_empty() || semantic.is_empty() {
            return Outcome::skip("needs both neutral and semantic summaries");
        }
        let (n_mean, n_cats) = category_mean(&neutral);
        let (s_mean, s_cats) = category_mean(&semantic);
        match intrinsic_fraction(n_mean, s_mean) {
            Some(fraction) => Outcome::Ran {
                result: IntrinsicFraction {
                    neutral_mean: n_mean,
                    semantic_mean: s_mean,
                    fraction,
                    neutral_categories: n_cats,
                    semantic_categories: s_cats,
                },
            },
            None => Outcome::skip("semantic mean ED is not positive"),
        }
    })
}

/// F7: Kruskal–Wallis across languages on Wikipedia prompts per model, with
/// pairwise Mann–Whitney tests and Cohen's d against the baseline language.
pub fn f7_multilingual(summaries: &[GenerationSummary], baseline: Language, alpha: f64) -> Sectioned<MultilingualTest> {
    let rows: Rows = summaries
        .iter()
        .filter(|s| s.row.prompt_category == PromptCategory::Wikipedia)
        .collect();
    per_model(&rows, |group| {
        let langs = group_by(group, |s| s.row.language);
        if langs.len() < 2 {
            return Outcome::skip("fewer than two languages");
        }
        let labels: Vec<String> = langs.keys().map(|l| l.code().to_string()).collect();
        let values: Vec<Vec<f64>> = langs.values().map(|g| ed_values(g)).collect();
        let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
        let kw = match kruskal_wallis(&refs) {
            Ok(kw) => kw,
            Err(e) => return Outcome::skip(e.to_string()),
        };
        let mut pairs = Vec::new();
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                if let Ok(r) = mann_whitney_u(&values[i], &values[j]) {
                    pairs.push(LabeledPair {
                        a: labels[i].clone(),
                        b: labels[j].clone(),
                        mean_difference: mean(&values[j]) - mean(&values[i]),
                        significant: r.significant(alpha),
                        result: r,
                    });
                }
            }
        }
        let base = langs.get(&baseline).map(|g| ed_values(g));
        let d = labels
            .iter()
            .zip(&values)
            .filter(|(l, _)| l.as_str() != baseline.code())
            .map(|(l, v)| (l.clone(), base.as_ref().and_then(|b| cohens_d(v, b).ok())))
            .collect();
        let mut ordered: Vec<GroupMean> = labels
            .iter()
            .zip(&values)
            .map(|(l, v)| GroupMean {
                label: l.clone(),
                n: v.len(),
                mean: mean(v),
            })
            .collect();
        ordered.sort_by(|a, b| a.mean.total_cmp(&b.mean));
        Outcome::Ran {
            result: MultilingualTest {
                kruskal_wallis: kw,
                languages: ordered,
                mann_whitney: pairs,
                cohens_d_vs_baseline: d,
            },
        }
    })
}

/// F8: per model, `ed_mean ~ generation_index (+ temperature when it varies)`.
pub fn f8_drift(summaries: &[GenerationSummary]) -> Sectioned<DriftFit> {
    let rows: Rows = summaries.iter().collect();
    per_model(&rows, |group| {
        if group.len() < 3 {
            return Outcome::skip("fewer than three summaries");
        }
        let y = ed_values(group);
        let idx: Vec<f64> = group.iter().map(|s| f64::from(s.row.generation_index)).collect();
        let temp: Vec<f64> = group.iter().map(|s| s.row.temperature).collect();
        let temp_varies = temp.iter().any(|t| *t != temp[0]);
        let (predictors, cols): (Vec<String>, Vec<&[f64]>) = if temp_varies {
            (
                vec!["generation_index".into(), "temperature".into()],
                vec![&idx, &temp],
            )
        } else {
            (vec!["generation_index".into()], vec![&idx])
        };
        match ols(&y, &cols, true) {
            Ok(fit) => Outcome::Ran {
                result: DriftFit { predictors, fit },
            },
            Err(StatsError::RankDeficient { column: 1 }) => {
                Outcome::skip("generation index is constant")
            }
            Err(e) => Outcome::skip(e.to_string()),
        }
    })
}

/// Neutral-category means per model, the matched `random_ascii` vs `empty`
/// paired t and a Tukey post-hoc across neutral categories.
pub fn neutral_gradient(summaries: &[GenerationSummary], alpha: f64) -> Sectioned<NeutralGradient> {
    let rows: Rows = summaries
        .iter()
        .filter(|s| s.row.prompt_category.class() == PromptClass::Neutral)
        .collect();
    per_model(&rows, |group| {
        let cats = group_by(group, |s| s.row.prompt_category);
        if cats.len() < 2 {
            return Outcome::skip("fewer than two neutral categories");
        }
        let labels: Vec<String> = cats.keys().map(|c| c.to_string()).collect();
        let values: Vec<Vec<f64>> = cats.values().map(|g| ed_values(g)).collect();
        let mut categories: Vec<GroupMean> = labels
            .iter()
            .zip(&values)
            .map(|(l, v)| GroupMean {
                label: l.clone(),
                n: v.len(),
                mean: mean(v),
            })
            .collect();
        categories.sort_by(|a, b| a.mean.total_cmp(&b.mean));
        let mut notes = Vec::new();

        let random_vs_empty = match (
            cats.get(&PromptCategory::RandomAscii),
            cats.get(&PromptCategory::Empty),
        ) {
            (Some(r), Some(e)) => {
                let key = |s: &GenerationSummary| (temperature_key(s.row.temperature), s.row.seed);
                let empties: BTreeMap<_, f64> = e.iter().map(|s| (key(s), s.ed_mean)).collect();
                let (x, y): (Vec<f64>, Vec<f64>) = r
                    .iter()
                    .filter_map(|s| Some((s.ed_mean, *empties.get(&key(s))?)))
                    .unzip();
                match t_paired(&x, &y) {
                    Ok(t) => Some(t),
                    Err(err) => {
                        notes.push(format!("random vs empty: {err} ({} matched pairs)", x.len()));
                        None
                    }
                }
            }
            _ => {
                notes.push("random_ascii or empty category missing".into());
                None
            }
        };
        let tukey = labeled_tukey(&labels, &values, alpha).unwrap_or_else(|e| {
            notes.push(format!("tukey: {e}"));
            Vec::new()
        });
        Outcome::Ran {
            result: NeutralGradient {
                categories,
                random_vs_empty,
                tukey,
                notes,
            },
        }
    })
}

/// Pairwise Spearman ρ between profiles of equal length.
pub fn domain_profile_convergence(profiles: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let k = profiles.len();
    let mut rho = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = spearman(&profiles[i], &profiles[j]).ok().map(|t| t.statistic);
            rho[i][j] = r;
            rho[j][i] = r;
        }
    }
    rho
}

fn profile_key(s: &GenerationSummary, g: ProfileGranularity) -> String {
    match g {
        ProfileGranularity::Domain => s.row.prompt_category.to_string(),
        ProfileGranularity::DomainTemperature => {
            format!("{}@T={}", s.row.prompt_category, s.row.temperature)
        }
        ProfileGranularity::Prompt => s.row.prompt_text_ref.clone(),
    }
}

/// Builds per-model semantic profiles at `granularity` over the keys every
/// model shares, then correlates them.
pub fn profile_matrix(
    summaries: &[GenerationSummary],
    granularity: ProfileGranularity,
    architecture: Option<Architecture>,
) -> Outcome<ProfileMatrix> {
    let rows: Rows = summaries
        .iter()
        .filter(|s| {
            s.row.prompt_category.class() == PromptClass::Semantic
                && architecture.is_none_or(|a| s.row.architecture == a)
        })
        .collect();
    let models = by_model(&rows);
    if models.len() < 2 {
        return Outcome::skip("fewer than two models");
    }
    let per_model: Vec<(String, BTreeMap<String, f64>)> = models
        .into_iter()
        .map(|(m, group)| {
            let prof = group_by(&group, |s| profile_key(s, granularity))
                .into_iter()
                .map(|(k, g)| (k, mean(&ed_values(&g))))
                .collect();
            (m, prof)
        })
        .collect();
    let keys: Vec<String> = per_model[0]
        .1
        .keys()
        .filter(|k| per_model.iter().all(|(_, p)| p.contains_key(*k)))
        .cloned()
        .collect();
    if keys.len() < 3 {
        return Outcome::skip(format!("only {} profile keys shared by all models", keys.len()));
    }
    let profiles: Vec<Vec<f64>> = per_model
        .iter()
        .map(|(_, p)| keys.iter().map(|k| p[k]).collect())
        .collect();
    Outcome::Ran {
        result: ProfileMatrix {
            granularity,
            models: per_model.into_iter().map(|(m, _)| m).collect(),
            keys,
            rho: domain_profile_convergence(&profiles),
        },
    }
}

/// Runs the selected analyses.
pub fn run_battery(summaries: &[GenerationSummary], config: &BatteryConfig) -> BatteryReport {
    let not_requested = || "not requested".to_string();
    macro_rules! section {
        ($a:expr, $e:expr) => {
            if config.wants($a) {
                $e
            } else {
                Outcome::Skipped {
                    reason: not_requested(),
                }
            }
        };
    }
    let alpha = config.alpha;
    let mut warnings = Vec::new();
    if summaries.is_empty() {
        warnings.push("empty summary set; every analysis is skipped".to_string());
    }
    BatteryReport {
        input_count: summaries.len(),
        config: config.clone(),
        f1_nonzero: section!(Analysis::F1, f1_nonzero(summaries, config.partition)),
        f2_domains: section!(Analysis::F2, f2_domains(summaries, alpha)),
        f3_size_effect: section!(Analysis::F3, f3_size_effect(summaries)),
        f4_temperature: section!(Analysis::F4, f4_temperature(summaries, alpha)),
        f5_autocorrelation: section!(Analysis::F5, f5_autocorrelation(summaries)),
        f6_intrinsic_fraction: section!(Analysis::F6, f6_intrinsic_fraction(summaries)),
        f7_multilingual: section!(
            Analysis::F7,
            f7_multilingual(summaries, config.baseline_language, alpha)
        ),
        f8_drift: section!(Analysis::F8, f8_drift(summaries)),
        neutral_gradient: section!(Analysis::NeutralGradient, neutral_gradient(summaries, alpha)),
        domain_profiles: section!(
            Analysis::DomainProfile,
            profile_matrix(summaries, config.profile_granularity, config.profile_architecture)
        ),
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{plant_summaries, SummaryPlant};

    #[test]
    fn intrinsic_fraction_examples() {
        assert!((intrinsic_fraction(0.300, 0.341).unwrap() - 0.880).abs() < 1e-3);
        assert!((intrinsic_fraction(0.620, 0.670).unwrap() - 0.925).abs() < 1e-3);
        assert_eq!(intrinsic_fraction(0.4, 0.4), Some(1.0));
        assert_eq!(intrinsic_fraction(0.4, 0.0), None);
    }

    #[test]
    fn profile_examples() {
        // code, news, fiction, wikipedia
        let gemma = vec![0.356, 0.342, 0.339, 0.337];
        let qwen = vec![0.360, 0.327, 0.336, 0.329];
        let rev: Vec<f64> = gemma.iter().rev().copied().collect();
        let m = domain_profile_convergence(&[gemma.clone(), qwen, gemma, rev]);
        assert!((m[0][1].unwrap() - 0.4).abs() < 1e-12);
        assert!((m[0][2].unwrap() - 1.0).abs() < 1e-12);
        assert!((m[0][3].unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_skips_everything() {
        let r = run_battery(&[], &BatteryConfig::default());
        assert!(r.f1_nonzero.skip_reason().is_some());
        assert!(r.f3_size_effect.skip_reason().is_some());
        assert!(r.f8_drift.skip_reason().is_some());
        assert!(r.domain_profiles.skip_reason().is_some());
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn f1_partitions_account_for_every_row() {
        let s = plant_summaries(
            &[
                SummaryPlant::new("a", PromptCategory::Code, 0.3, 0.05, 10),
                SummaryPlant::new("a", PromptCategory::Empty, 0.3, 0.05, 7),
                SummaryPlant::new("b", PromptCategory::News, 0.3, 0.05, 1),
            ],
            0.0,
            1,
        );
        let Outcome::Ran { result } = f1_nonzero(&s, PartitionScheme::ModelClass) else {
            panic!()
        };
        assert_eq!(result.iter().map(|p| p.n).sum::<usize>(), s.len());
        assert_eq!(result.len(), 3);
        assert!(result[2].outcome.skip_reason().is_some());
    }

    #[test]
    fn single_level_and_constant_index_skip() {
        let s = plant_summaries(&[SummaryPlant::new("a", PromptCategory::Code, 0.3, 0.05, 5)], 0.0, 2);
        let Outcome::Ran { result } = f4_temperature(&s, 0.05) else { panic!() };
        assert_eq!(result[0].outcome.skip_reason(), Some("single temperature level"));
        let mut s = s;
        for x in &mut s {
            x.row.generation_index = 3;
        }
        let Outcome::Ran { result } = f8_drift(&s) else { panic!() };
        assert_eq!(result[0].outcome.skip_reason(), Some("generation index is constant"));
    }

    #[test]
    fn analysis_names() {
        assert_eq!("F4".parse::<Analysis>(), Ok(Analysis::F4));
        assert_eq!("neutral_gradient".parse::<Analysis>(), Ok(Analysis::NeutralGradient));
        assert!(matches!("f9".parse::<Analysis>(), Err(BatteryError::UnknownAnalysis(_))));
        assert!(BatteryConfig::default().with_analyses(vec![]).is_err());
    }
}
