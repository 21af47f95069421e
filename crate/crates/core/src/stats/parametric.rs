use serde::{Deserialize, Serialize};

use super::distributions::{f_sf, t_two_sided_p};
use super::studentized::tukey_sf;
use super::{check_finite, check_len, mean, sample_var, sum_sq_dev, Result, StatsError, TestResult};

/// One-sample t-test of `H0: mean = mu0`. Effect size is `(x̄ − mu0)/s`.
pub fn t_one_sample(x: &[f64], mu0: f64) -> Result<TestResult> {
    check_len(x, 2)?;
    if !mu0.is_finite() {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let m = mean(x);
    let sd = sample_var(x).sqrt();
    if sd == 0.0 {
        return Err(StatsError::Degenerate("sample has zero variance".into()));
    }
    let t = (m - mu0) / (sd / n.sqrt());
    let df = n - 1.0;
    Ok(TestResult::new("t_one_sample", t, Some(t_two_sided_p(t, df)))
        .with_df(&[df])
        .with_groups(vec![x.len()])
        .with_effect((m - mu0) / sd))
}

/// Paired t-test on `x − y`.
pub fn t_paired(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(y)?;
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut r = t_one_sample(&diffs, 0.0).map_err(|e| match e {
        StatsError::Degenerate(_) => {
            StatsError::Degenerate("paired differences have zero variance".into())
        }
        other => other,
    })?;
    r.test_name = "t_paired".into();
    Ok(r)
}

fn check_groups(groups: &[&[f64]], min_groups: usize) -> Result<()> {
    if groups.len() < min_groups {
        return Err(StatsError::TooFewGroups {
            needed: min_groups,
            got: groups.len(),
        });
    }
    for g in groups {
        check_len(g, 1)?;
    }
    Ok(())
}

struct WithinBetween {
    ss_between: f64,
    ss_within: f64,
    df_between: f64,
    df_within: f64,
}

fn decompose(groups: &[&[f64]]) -> Result<WithinBetween> {
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let k = groups.len();
    if n <= k {
        return Err(StatsError::TooFewObservations {
            needed: k + 1,
            got: n,
        });
    }
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let ss_between = groups
        .iter()
        .map(|g| g.len() as f64 * (mean(g) - grand).powi(2))
        .sum();
    let ss_within = groups.iter().map(|g| sum_sq_dev(g)).sum();
    Ok(WithinBetween {
        ss_between,
        ss_within,
        df_between: (k - 1) as f64,
        df_within: (n - k) as f64,
    })
}

/// One-way ANOVA. Effect size is η² = SSB/(SSB+SSW).
pub fn anova_oneway(groups: &[&[f64]]) -> Result<TestResult> {
    check_groups(groups, 2)?;
    let d = decompose(groups)?;
    if d.ss_within == 0.0 {
        return Err(StatsError::Degenerate("within-group variance is zero".into()));
    }
    let f = (d.ss_between / d.df_between) / (d.ss_within / d.df_within);
    let eta2 = d.ss_between / (d.ss_between + d.ss_within);
    Ok(TestResult::new("anova_oneway", f, Some(f_sf(f, d.df_between, d.df_within)))
        .with_df(&[d.df_between, d.df_within])
        .with_groups(groups.iter().map(|g| g.len()).collect())
        .with_effect(eta2))
}

/// One Tukey–Kramer pairwise comparison between groups `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: usize,
    pub b: usize,
    /// `mean(b) − mean(a)`.
    pub mean_difference: f64,
    pub result: TestResult,
    pub significant: bool,
}

/// Tukey HSD (Tukey–Kramer for unequal sizes) over all pairs `a < b`.
///
/// `q = |x̄_a − x̄_b| / √(MSE/2 · (1/n_a + 1/n_b))`, p from the studentized
/// range with `k` groups and `N − k` degrees of freedom.
pub fn tukey_hsd(groups: &[&[f64]], alpha: f64) -> Result<Vec<PairwiseComparison>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    check_groups(groups, 2)?;
    let d = decompose(groups)?;
    if d.ss_within == 0.0 {
        return Err(StatsError::Degenerate("within-group variance is zero".into()));
    }
    let mse = d.ss_within / d.df_within;
    let k = groups.len();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let (na, nb) = (groups[a].len() as f64, groups[b].len() as f64);
            let se = (0.5 * mse * (1.0 / na + 1.0 / nb)).sqrt();
            let diff = means[b] - means[a];
            let q = diff.abs() / se;
            let p = tukey_sf(q, k, d.df_within);
            let result = TestResult::new("tukey_hsd", q, Some(p))
                .with_df(&[k as f64, d.df_within])
                .with_groups(vec![groups[a].len(), groups[b].len()])
                .note("studentized range by Gauss-Legendre integration");
            out.push(PairwiseComparison {
                a,
                b,
                mean_difference: diff,
                significant: p < alpha,
                result,
            });
        }
    }
    Ok(out)
}

/// Pearson product-moment correlation; p from `t = r√((n−2)/(1−r²))`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult> {
    let r = pearson_r(x, y)?;
    Ok(correlation_result("pearson", r, x.len()))
}

pub(crate) fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_len(x, 3)?;
    check_finite(y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Degenerate("a variable has zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub(crate) fn correlation_result(name: &str, r: f64, n: usize) -> TestResult {
    let df = (n - 2) as f64;
    let p = if (1.0 - r.abs()) < 1e-15 {
        0.0
    } else {
        t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    TestResult::new(name, r, Some(p))
        .with_df(&[df])
        .with_groups(vec![n])
        .with_effect(r)
}

/// `(x̄ − ȳ) / s_pooled` with the pooled sample standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x, 2)?;
    check_len(y, 2)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let pooled = ((sum_sq_dev(x) + sum_sq_dev(y)) / (nx + ny - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(StatsError::Degenerate("pooled standard deviation is zero".into()));
    }
    Ok((mean(x) - mean(y)) / pooled)
}
