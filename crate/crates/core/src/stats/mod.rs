//! The statistical procedures used by the falsification battery and the
//! multilingual analysis.
//!
//! Every procedure takes plain `f64` samples and returns a [`TestResult`],
//! a [`RegressionFit`] or a typed [`StatsError`]; degenerate inputs are
//! rejected rather than surfacing NaN.
//!
//! Conventions: mid-ranks for ties, tie-corrected Kruskal–Wallis and
//! Mann–Whitney, two-sided p-values.

pub mod distributions;
mod parametric;
mod rank;
mod regression;
pub mod studentized;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parametric::{
    anova_oneway, cohens_d, pearson, t_one_sample, t_paired, tukey_hsd, PairwiseComparison,
};
pub use rank::{
    kruskal_wallis, mann_whitney_u, mann_whitney_u_with, midranks, spearman, MannWhitneyMethod,
};
pub use regression::{durbin_watson, dw_band, ols, residualize, DwBand, RegressionFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("need at least {needed} groups, got {got}")]
    TooFewGroups { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite input value")]
    NonFinite,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    /// Two-sided unless noted; absent for statistic-only procedures.
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<f64>,
    /// Degrees of freedom, in the order the distribution takes them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub df: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub method_notes: Vec<String>,
}

impl TestResult {
    pub(crate) fn new(test_name: &str, statistic: f64, p_value: Option<f64>) -> Self {
        TestResult {
            test_name: test_name.to_string(),
            statistic,
            p_value: p_value.map(clamp_p),
            effect_size: None,
            df: Vec::new(),
            group_sizes: Vec::new(),
            method_notes: Vec::new(),
        }
    }

    pub(crate) fn with_df(mut self, df: &[f64]) -> Self {
        self.df = df.to_vec();
        self
    }

    pub(crate) fn with_groups(mut self, sizes: Vec<usize>) -> Self {
        self.group_sizes = sizes;
        self
    }

    pub(crate) fn with_effect(mut self, d: f64) -> Self {
        self.effect_size = Some(d);
        self
    }

    pub(crate) fn note(mut self, n: impl Into<String>) -> Self {
        self.method_notes.push(n.into());
        self
    }

    /// `p < alpha`; false when there is no p-value.
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value.is_some_and(|p| p < alpha)
    }
}

pub(crate) fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub(crate) fn check_len(xs: &[f64], needed: usize) -> Result<()> {
    if xs.len() < needed {
        return Err(StatsError::TooFewObservations {
            needed,
            got: xs.len(),
        });
    }
    check_finite(xs)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the mean (two-pass).
pub(crate) fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum()
}

pub(crate) fn sample_var(xs: &[f64]) -> f64 {
    sum_sq_dev(xs) / (xs.len() - 1) as f64
}
