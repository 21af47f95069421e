use serde::{Deserialize, Serialize};

use super::distributions::t_two_sided_p;
use super::{check_finite, check_len, mean, sum_sq_dev, Result, StatsError, TestResult};

/// Relative threshold on `|R_jj| / ‖x_j‖` below which a column is treated as
/// linearly dependent on the preceding ones.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Intercept first when fitted, then one slope per predictor column.
    pub coefficients: Vec<f64>,
    /// Absent when there are no residual degrees of freedom.
    pub std_errors: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub df_resid: usize,
    pub has_intercept: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RegressionFit {
    /// Coefficient for predictor column `j` (0-based, excluding the intercept).
    pub fn slope(&self, j: usize) -> f64 {
        self.coefficients[j + usize::from(self.has_intercept)]
    }

    pub fn slope_se(&self, j: usize) -> Option<f64> {
        self.std_errors
            .as_ref()
            .map(|se| se[j + usize::from(self.has_intercept)])
    }

    pub fn slope_p(&self, j: usize) -> Option<f64> {
        self.p_values
            .as_ref()
            .map(|p| p[j + usize::from(self.has_intercept)])
    }
}

/// Ordinary least squares via Householder QR.
pub fn ols(y: &[f64], predictors: &[&[f64]], include_intercept: bool) -> Result<RegressionFit> {
    let n = y.len();
    check_finite(y)?;
    for col in predictors {
        if col.len() != n {
            return Err(StatsError::LengthMismatch {
                left: n,
                right: col.len(),
            });
        }
        check_finite(col)?;
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(predictors.len() + 1);
    if include_intercept {
        columns.push(vec![1.0; n]);
    }
    columns.extend(predictors.iter().map(|c| c.to_vec()));
    let p = columns.len();
    if p == 0 {
        return Err(StatsError::InvalidArgument("no columns in design".into()));
    }
    if n < p {
        return Err(StatsError::TooFewObservations { needed: p, got: n });
    }
    let col_norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    // In-place Householder: `columns` becomes R above the diagonal, `qty` = Qᵀy.
    let mut qty = y.to_vec();
    let mut r_diag = vec![0.0; p];
    for j in 0..p {
        let norm = columns[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOLERANCE * col_norms[j] || col_norms[j] == 0.0 {
            return Err(StatsError::RankDeficient { column: j });
        }
        let alpha = if columns[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = columns[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        r_diag[j] = alpha;
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let s = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        };
        for col in columns.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
        columns[j][j] = alpha;
    }

    // Back substitution for β.
    let r = |i: usize, j: usize| if i == j { r_diag[i] } else { columns[j][i] };
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut acc = qty[i];
        for (k, b) in beta.iter().enumerate().skip(i + 1) {
            acc -= r(i, k) * b;
        }
        beta[i] = acc / r(i, i);
    }

    let residuals: Vec<f64> = (0..n)
        .map(|row| {
            let mut fitted = if include_intercept { beta[0] } else { 0.0 };
            for (j, col) in predictors.iter().enumerate() {
                fitted += beta[j + usize::from(include_intercept)] * col[row];
            }
            y[row] - fitted
        })
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tss = if include_intercept {
        sum_sq_dev(y)
    } else {
        y.iter().map(|v| v * v).sum()
    };
    if tss == 0.0 {
        return Err(StatsError::Degenerate("response has zero variance".into()));
    }
    let r_squared = (1.0 - rss / tss).clamp(0.0, 1.0);
    let df_resid = n - p;

    let mut notes = Vec::new();
    let (std_errors, p_values) = if df_resid == 0 {
        notes.push("no residual degrees of freedom; standard errors unavailable".to_string());
        (None, None)
    } else {
        // R⁻¹ column by column; Var(β) = σ² R⁻¹ R⁻ᵀ.
        let mut rinv = vec![vec![0.0; p]; p];
        for c in 0..p {
            for i in (0..=c).rev() {
                let mut acc = if i == c { 1.0 } else { 0.0 };
                for k in i + 1..=c {
                    acc -= r(i, k) * rinv[k][c];
                }
                rinv[i][c] = acc / r(i, i);
            }
        }
        let sigma2 = rss / df_resid as f64;
        let se: Vec<f64> = (0..p)
            .map(|i| (sigma2 * rinv[i].iter().map(|v| v * v).sum::<f64>()).sqrt())
            .collect();
        let pv: Vec<f64> = beta
            .iter()
            .zip(&se)
            .map(|(&b, &s)| {
                if s == 0.0 {
                    if b == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    t_two_sided_p(b / s, df_resid as f64)
                }
            })
            .collect();
        if df_resid < 3 {
            notes.push(format!("only {df_resid} residual degrees of freedom"));
        }
        (Some(se), Some(pv))
    };

    Ok(RegressionFit {
        coefficients: beta,
        std_errors,
        p_values,
        r_squared,
        residuals,
        df_resid,
        has_intercept: include_intercept,
        notes,
    })
}

/// Residuals of `y` regressed on `x` with an intercept. A constant `x`
/// carries no information beyond the intercept, so `y` is only centred.
pub fn residualize(y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if y.len() != x.len() {
        return Err(StatsError::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    check_len(y, 2)?;
    check_finite(x)?;
    if sum_sq_dev(x) == 0.0 {
        let m = mean(y);
        return Ok(y.iter().map(|v| v - m).collect());
    }
    match ols(y, &[x], true) {
        Ok(fit) => Ok(fit.residuals),
        // y constant: every residual is zero
        Err(StatsError::Degenerate(_)) => Ok(vec![0.0; y.len()]),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwBand {
    Positive,
    None,
    Negative,
}

/// `< 1.5` positive autocorrelation, `> 2.5` negative.
pub fn dw_band(statistic: f64) -> DwBand {
    if statistic < 1.5 {
        DwBand::Positive
    } else if statistic > 2.5 {
        DwBand::Negative
    } else {
        DwBand::None
    }
}

/// Durbin–Watson statistic `Σ(e_t − e_{t−1})² / Σ e_t²`. No p-value.
pub fn durbin_watson(residuals: &[f64]) -> Result<TestResult> {
    check_len(residuals, 2)?;
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(StatsError::Degenerate("all residuals are zero".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let dw = num / den;
    let band = match dw_band(dw) {
        DwBand::Positive => "positive autocorrelation (< 1.5)",
        DwBand::None => "no autocorrelation band",
        DwBand::Negative => "negative autocorrelation (> 2.5)",
    };
    Ok(TestResult::new("durbin_watson", dw, None)
        .with_groups(vec![residuals.len()])
        .note(band))
}
