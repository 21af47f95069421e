use super::distributions::{chi2_sf, normal_two_sided_p};
use super::parametric::{correlation_result, pearson_r};
use super::{check_finite, check_len, Result, StatsError, TestResult};

/// Largest pooled size for which the auto method enumerates exactly.
pub const MANN_WHITNEY_EXACT_MAX: usize = 12;

/// Doubled mid-ranks (integers: `a + b` for a tie block at 1-based
/// positions `a..=b`) and the tie term `Σ (t³ − t)`.
fn doubled_midranks(values: &[f64]) -> (Vec<u64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; n];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let doubled = (i + 1 + j + 1) as u64;
        for &idx in &order[i..=j] {
            ranks[idx] = doubled;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Mid-ranks (1-based, ties share the average rank).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    doubled_midranks(values).0.into_iter().map(|r| r as f64 / 2.0).collect()
}

/// Kruskal–Wallis H with the standard tie correction; p from χ²(k − 1).
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups {
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        check_len(g, 1)?;
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = doubled_midranks(&pooled);
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let df = (groups.len() - 1) as f64;
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(TestResult::new("kruskal_wallis", 0.0, Some(1.0))
            .with_df(&[df])
            .with_groups(sizes)
            .note("all values tied"));
    }
    let mut offset = 0;
    let mut sum_term = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()]
            .iter()
            .map(|&d| d as f64 / 2.0)
            .sum();
        sum_term += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0);
    let h = (h_raw / correction).max(0.0);
    // epsilon-squared effect size
    let eps2 = h / (n - 1.0);
    let mut r = TestResult::new("kruskal_wallis", h, Some(chi2_sf(h, df)))
        .with_df(&[df])
        .with_groups(sizes)
        .with_effect(eps2)
        .note("chi-square approximation");
    if ties > 0.0 {
        r = r.note("tie-corrected");
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MannWhitneyMethod {
    /// Exact when `n1 + n2 ≤ 12`, normal approximation otherwise.
    Auto,
    Exact,
    Normal,
}

/// Mann–Whitney U for `x` against `y`, two-sided.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult> {
    mann_whitney_u_with(x, y, MannWhitneyMethod::Auto)
}

/// The statistic is `U_x` (count of pairs with `x > y`, ties counted half);
/// the effect size is `U_x / (n1·n2)`.
pub fn mann_whitney_u_with(x: &[f64], y: &[f64], method: MannWhitneyMethod) -> Result<TestResult> {
    check_len(x, 1)?;
    check_len(y, 1)?;
    let (n1, n2) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let doubled_rank_sum: u64 = ranks[..n1].iter().sum();
    // 2·U_x, an integer even with mid-ranks
    let twice_u = doubled_rank_sum as i64 - (n1 * (n1 + 1)) as i64;
    let u = twice_u as f64 / 2.0;
    let nn = (n1 * n2) as f64;

    let exact = match method {
        MannWhitneyMethod::Exact => true,
        MannWhitneyMethod::Normal => false,
        MannWhitneyMethod::Auto => n1 + n2 <= MANN_WHITNEY_EXACT_MAX,
    };
    let result = if exact {
        let p = exact_two_sided_p(&ranks, n1, twice_u);
        TestResult::new("mann_whitney_u", u, Some(p)).note("exact permutation distribution")
    } else {
        let n = (n1 + n2) as f64;
        let var = nn / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
        if var <= 0.0 {
            TestResult::new("mann_whitney_u", u, Some(1.0)).note("all values tied")
        } else {
            let dev = (u - nn / 2.0).abs();
            let z = (dev - 0.5).max(0.0) / var.sqrt();
            TestResult::new("mann_whitney_u", u, Some(normal_two_sided_p(z)))
                .note("normal approximation with continuity and tie correction")
        }
    };
    Ok(result.with_groups(vec![n1, n2]).with_effect(u / nn))
}

/// Fraction of `n1`-subsets of the pooled doubled ranks whose `|2U − n1·n2|`
/// is at least the observed one.
fn exact_two_sided_p(ranks: &[u64], n1: usize, twice_u_obs: i64) -> f64 {
    let n = ranks.len();
    let n2 = n - n1;
    let center = (n1 * n2) as i64;
    let observed = (twice_u_obs - center).abs();
    let base = (n1 * (n1 + 1)) as i64;

    fn walk(
        ranks: &[u64],
        start: usize,
        remaining: usize,
        sum: u64,
        visit: &mut dyn FnMut(u64),
    ) {
        if remaining == 0 {
            visit(sum);
            return;
        }
        for i in start..=ranks.len() - remaining {
            walk(ranks, i + 1, remaining - 1, sum + ranks[i], visit);
        }
    }

    let mut total = 0u64;
    let mut extreme = 0u64;
    walk(ranks, 0, n1, 0, &mut |s| {
        total += 1;
        if (s as i64 - base - center).abs() >= observed {
            extreme += 1;
        }
    });
    extreme as f64 / total as f64
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_len(x, 3)?;
    check_finite(y)?;
    let rho = pearson_r(&midranks(x), &midranks(y))?;
    Ok(correlation_result("spearman", rho, x.len()).note("p from t approximation"))
}
