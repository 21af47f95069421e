//! `zipf`: ED of a pure power-law next-token distribution over a grid of
//! exponents and vocabulary sizes.

use edprof::{zipf_ed, ZipfParams};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZipfRow {
    pub alpha: f64,
    pub vocab_size: usize,
    pub ed: f64,
}

/// Rows in `vocab_sizes`-major order, alphas ascending within each size.
pub fn cmd_zipf(alphas: &[f64], vocab_sizes: &[usize]) -> Result<Vec<ZipfRow>, CliError> {
    if alphas.is_empty() || vocab_sizes.is_empty() {
        return Err(CliError::Usage("need at least one alpha and one vocabulary size".into()));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &v in vocab_sizes {
        for &alpha in &sorted {
            let params = ZipfParams::new(alpha, v).map_err(|e| CliError::Usage(e.to_string()))?;
            rows.push(ZipfRow {
                alpha,
                vocab_size: v,
                ed: zipf_ed(params),
            });
        }
    }
    Ok(rows)
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{spec:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("{spec:?}: expected start:stop:step"));
    };
    if !(step > 0.0) || stop < start {
        return Err(format!("{spec:?}: need step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}
