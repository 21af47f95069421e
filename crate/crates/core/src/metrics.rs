//! Entropy, entropic deviation (ED), sequence aggregates, temperature-scaled
//! softmax, Zipfian baselines and the perplexity relation.
//!
//! All logarithms are natural. ED is `1 − H(p)/ln V`, equivalently the KL
//! divergence from the uniform distribution divided by `ln V`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{pairwise_sum, pairwise_sum2, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("vocabulary size {0} is below the minimum of 2")]
    VocabTooSmall(usize),
    #[error("negative probability mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("probability mass sums to {sum}, outside tolerance {tolerance} of 1")]
    NotNormalized { sum: f64, tolerance: f64 },
    #[error("temperature must be finite and > 0, got {0}")]
    InvalidTemperature(f64),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("entropy must be >= 0, got {0}")]
    NegativeEntropy(f64),
    #[error("zipf exponent must be finite and >= 0, got {0}")]
    InvalidExponent(f64),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// A validated probability distribution over a vocabulary of size `V ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist<S> {
    mass: Vec<S>,
}

impl<S: Scalar> ProbDist<S> {
    /// Validates against the element type's default normalization tolerance.
    pub fn new(mass: Vec<S>) -> Result<Self> {
        Self::with_tolerance(mass, S::NORM_TOLERANCE)
    }

    /// Never renormalizes: out-of-tolerance input is an error.
    pub fn with_tolerance(mass: Vec<S>, tolerance: f64) -> Result<Self> {
        validate_mass(&mass, tolerance)?;
        Ok(ProbDist { mass })
    }

    pub fn uniform(vocab_size: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(MetricsError::VocabTooSmall(vocab_size));
        }
        let v = S::narrow(1.0 / vocab_size as f64);
        Ok(ProbDist {
            mass: vec![v; vocab_size],
        })
    }

    pub fn one_hot(vocab_size: usize, index: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(MetricsError::VocabTooSmall(vocab_size));
        }
        let mut mass = vec![S::zero(); vocab_size];
        mass[index] = S::one();
        Ok(ProbDist { mass })
    }

    pub fn vocab_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[S] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<S> {
        self.mass
    }
}

pub(crate) fn validate_mass<S: Scalar>(mass: &[S], tolerance: f64) -> Result<()> {
    validate_mass_by(mass.len(), |i| mass[i].widen(), tolerance)
}

/// Validation over an indexed accessor, for callers holding encoded values.
pub(crate) fn validate_mass_by<F: Fn(usize) -> f64>(n: usize, get: F, tolerance: f64) -> Result<()> {
    if n < 2 {
        return Err(MetricsError::VocabTooSmall(n));
    }
    for index in 0..n {
        let v = get(index);
        if !v.is_finite() {
            return Err(MetricsError::NonFinite { index });
        }
        if v < 0.0 {
            return Err(MetricsError::NegativeMass { index, value: v });
        }
    }
    let sum = pairwise_sum(n, &get);
    if (sum - 1.0).abs() > tolerance {
        return Err(MetricsError::NotNormalized { sum, tolerance });
    }
    Ok(())
}

/// Unnormalized scores for one position. All entries finite, `V ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector<S> {
    logits: Vec<S>,
}

impl<S: Scalar> LogitVector<S> {
    pub fn new(logits: Vec<S>) -> Result<Self> {
        validate_logits(&logits)?;
        Ok(LogitVector { logits })
    }

    pub fn vocab_size(&self) -> usize {
        self.logits.len()
    }

    pub fn logits(&self) -> &[S] {
        &self.logits
    }
}

pub(crate) fn validate_logits<S: Scalar>(logits: &[S]) -> Result<()> {
    if logits.len() < 2 {
        return Err(MetricsError::VocabTooSmall(logits.len()));
    }
    if let Some(index) = logits.iter().position(|z| !z.is_finite()) {
        return Err(MetricsError::NonFinite { index });
    }
    Ok(())
}

pub(crate) fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(MetricsError::InvalidTemperature(temperature));
    }
    Ok(())
}

/// Shannon entropy in nats over an already-validated mass accessor.
pub(crate) fn entropy_by<F: Fn(usize) -> f64>(n: usize, get: F) -> f64 {
    let h = -pairwise_sum(n, |i| {
        let p = get(i);
        if p == 0.0 {
            0.0
        } else {
            p * p.ln()
        }
    });
    h.max(0.0)
}

/// Shannon entropy `H(p) = −Σ p_i ln p_i` in nats, with `0·ln 0 := 0`.
pub fn entropy<S: Scalar>(p: &ProbDist<S>) -> f64 {
    entropy_by(p.mass.len(), |i| p.mass[i].widen())
}

/// Maps an entropy in nats to ED for a vocabulary of size `V`, clamped to `[0, 1]`
/// to absorb last-ulp rounding.
pub fn ed_from_entropy(entropy: f64, vocab_size: usize) -> f64 {
    (1.0 - entropy / (vocab_size as f64).ln()).clamp(0.0, 1.0)
}

/// Entropic deviation `1 − H(p)/ln V`.
pub fn ed<S: Scalar>(p: &ProbDist<S>) -> f64 {
    ed_from_entropy(entropy(p), p.vocab_size())
}

/// `D_KL(p ‖ u)` in nats, where `u` is uniform over the vocabulary.
pub fn kl_from_uniform<S: Scalar>(p: &ProbDist<S>) -> f64 {
    let v = p.vocab_size() as f64;
    pairwise_sum(p.mass.len(), |i| {
        let pi = p.mass[i].widen();
        if pi == 0.0 {
            0.0
        } else {
            pi * (pi * v).ln()
        }
    })
}

/// Entropy of `softmax(z/T)` computed in log space without materializing
/// probabilities: with `d_i = (z_i − max z)/T` and `w_i = exp(d_i)`,
/// `H = ln Σw − Σ w_i d_i / Σw`.
pub fn logit_entropy<S: Scalar>(logits: &[S], temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    validate_logits(logits)?;
    Ok(logit_entropy_by(logits.len(), |i| logits[i].widen(), temperature))
}

pub(crate) fn logit_entropy_by<F: Fn(usize) -> f64>(n: usize, get: F, temperature: f64) -> f64 {
    let max = (0..n).map(&get).fold(f64::NEG_INFINITY, f64::max);
    let inv_t = 1.0 / temperature;
    let (sum_w, sum_wd) = pairwise_sum2(n, |i| {
        let d = (get(i) - max) * inv_t;
        let w = d.exp();
        // w underflows to 0 for d below about -745; the product is then 0 too.
        if w == 0.0 {
            (0.0, 0.0)
        } else {
            (w, w * d)
        }
    });
    (sum_w.ln() - sum_wd / sum_w).max(0.0)
}

/// ED of `softmax(z/T)`.
pub fn logit_ed<S: Scalar>(logits: &LogitVector<S>, temperature: f64) -> Result<f64> {
    let h = logit_entropy(&logits.logits, temperature)?;
    Ok(ed_from_entropy(h, logits.vocab_size()))
}

/// `p_i ∝ exp(z_i/T)` via max subtraction. Output is always `f64`.
pub fn softmax_with_temperature<S: Scalar>(
    z: &LogitVector<S>,
    temperature: f64,
) -> Result<ProbDist<f64>> {
    check_temperature(temperature)?;
    let max = z
        .logits
        .iter()
        .map(|v| v.widen())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut mass: Vec<f64> = z
        .logits
        .iter()
        .map(|v| ((v.widen() - max) / temperature).exp())
        .collect();
    let total = pairwise_sum(mass.len(), |i| mass[i]);
    for m in &mut mass {
        *m /= total;
    }
    Ok(ProbDist { mass })
}

/// Whether the within-sequence standard deviation divides by `L − 1` or `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    #[default]
    Sample,
    Population,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEdProfile {
    pub per_position_ed: Vec<f64>,
    pub ed_mean: f64,
    pub ed_std: f64,
}

/// Batch mean and standard deviation of per-position ED.
pub fn ed_sequence<S: Scalar>(
    per_position: &[ProbDist<S>],
    convention: StdConvention,
) -> Result<SequenceEdProfile> {
    if per_position.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let per_position_ed: Vec<f64> = per_position.iter().map(ed).collect();
    let (ed_mean, ed_std) = mean_std(&per_position_ed, convention);
    Ok(SequenceEdProfile {
        per_position_ed,
        ed_mean,
        ed_std,
    })
}

/// Two-pass mean and standard deviation; the std is 0 for a single value.
pub fn mean_std(values: &[f64], convention: StdConvention) -> (f64, f64) {
    let n = values.len();
    let mean = pairwise_sum(n, |i| values[i]) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum(n, |i| (values[i] - mean).powi(2));
    let denom = match convention {
        StdConvention::Sample => (n - 1) as f64,
        StdConvention::Population => n as f64,
    };
    (mean, (ss / denom).sqrt())
}

/// Single-pass accumulator over per-position ED and entropy.
///
/// Holds O(1) state. Also accumulates the lag-1 difference sum so the
/// Durbin–Watson statistic of the mean-centred ED series is available at
/// the end (the mean cancels in the numerator).
#[derive(Debug, Clone, Default)]
pub struct EdAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
    entropy_sum: f64,
    prev: Option<f64>,
    diff_sq_sum: f64,
}

impl EdAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ed: f64, entropy: f64) {
        self.count += 1;
        let delta = ed - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (ed - self.mean);
        self.entropy_sum += entropy;
        if let Some(prev) = self.prev {
            self.diff_sq_sum += (ed - prev).powi(2);
        }
        self.prev = Some(ed);
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn std(&self, convention: StdConvention) -> Option<f64> {
        match self.count {
            0 => None,
            1 => Some(0.0),
            n => {
                let denom = match convention {
                    StdConvention::Sample => (n - 1) as f64,
                    StdConvention::Population => n as f64,
                };
                Some((self.m2.max(0.0) / denom).sqrt())
            }
        }
    }

    pub fn mean_entropy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.entropy_sum / self.count as f64)
    }

    /// `None` for fewer than two positions or a constant series.
    pub fn durbin_watson(&self) -> Option<f64> {
        (self.count >= 2 && self.m2 > 0.0).then(|| self.diff_sq_sum / self.m2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfParams {
    alpha: f64,
    vocab_size: usize,
}

impl ZipfParams {
    pub fn new(alpha: f64, vocab_size: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(MetricsError::InvalidExponent(alpha));
        }
        if vocab_size < 2 {
            return Err(MetricsError::VocabTooSmall(vocab_size));
        }
        Ok(ZipfParams { alpha, vocab_size })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

/// ED of the pure power law `p_i ∝ i^{−α}`, `i = 1..V`.
///
/// Uses `H = ln Z + (α/Z) Σ i^{−α} ln i` with `Z = Σ i^{−α}`.
pub fn zipf_ed(params: ZipfParams) -> f64 {
    let ZipfParams { alpha, vocab_size } = params;
    if alpha == 0.0 {
        return 0.0;
    }
    let (z, s) = pairwise_sum2(vocab_size, |i| {
        let rank = (i + 1) as f64;
        let w = rank.powf(-alpha);
        (w, w * rank.ln())
    });
    let h = z.ln() + alpha * s / z;
    ed_from_entropy(h.max(0.0), vocab_size)
}

/// Perplexity `exp(H)`.
pub fn entropy_to_perplexity(entropy: f64) -> Result<f64> {
    if entropy.is_nan() || entropy < 0.0 {
        return Err(MetricsError::NegativeEntropy(entropy));
    }
    Ok(entropy.exp())
}
