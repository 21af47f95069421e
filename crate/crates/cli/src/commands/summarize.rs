//! `summarize`: one summary row per manifest row, computed in parallel and
//! written in manifest order.
//!
//! Outputs, under the output directory:
//! - `summaries.jsonl`: one `GenerationSummary` per successful row.
//! - `failures.jsonl`: `{generation_index, stream_path, error}` per failed row;
//!   always written, empty when everything succeeded.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use edprof::summary::summarize_for_row;
use edprof::{GenerationSummary, Manifest, ManifestRow, StdConvention};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, pool, write_jsonl};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct SummarizeOptions {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
    pub std_convention: StdConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub generation_index: u32,
    pub stream_path: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SummarizeReport {
    pub summaries: Vec<GenerationSummary>,
    pub failures: Vec<Failure>,
    pub summaries_path: PathBuf,
    pub failures_path: PathBuf,
}

impl SummarizeReport {
    /// Partial failure as an error, for exit-code purposes.
    pub fn check(&self) -> Result<(), CliError> {
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::PartialFailure {
                failed: self.failures.len(),
                total: self.failures.len() + self.summaries.len(),
                failures: self.failures_path.clone(),
            })
        }
    }
}

fn summarize_row(manifest: &Path, row: &ManifestRow, std: StdConvention) -> Result<GenerationSummary, Failure> {
    let path = Manifest::resolve_stream_path(manifest, row);
    let fail = |error: String| Failure {
        generation_index: row.generation_index,
        stream_path: row.stream_path.clone(),
        error,
    };
    let file = File::open(&path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    summarize_for_row(BufReader::with_capacity(1 << 16, file), row, std).map_err(|e| fail(e.to_string()))
}

/// Summarizes every stream in the manifest. Stream failures are collected,
/// not fatal; call [`SummarizeReport::check`] to turn them into an error.
pub fn cmd_summarize(opts: &SummarizeOptions) -> Result<SummarizeReport, CliError> {
    let manifest = Manifest::read_jsonl(&opts.manifest)?;
    let results: Vec<Result<GenerationSummary, Failure>> = pool(opts.jobs)?.install(|| {
        manifest
            .rows
            .par_iter()
            .map(|row| summarize_row(&opts.manifest, row, opts.std_convention))
            .collect()
    });
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => summaries.push(s),
            Err(f) => failures.push(f),
        }
    }
    ensure_dir(&opts.out)?;
    let summaries_path = opts.out.join("summaries.jsonl");
    let failures_path = opts.out.join("failures.jsonl");
    write_jsonl(&summaries_path, &summaries)?;
    write_jsonl(&failures_path, &failures)?;
    Ok(SummarizeReport {
        summaries,
        failures,
        summaries_path,
        failures_path,
    })
}
