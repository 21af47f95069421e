pub mod battery;
pub mod prompts;
pub mod report;
pub mod summarize;
pub mod synth;
pub mod zipf;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use edprof::GenerationSummary;
use serde::Serialize;

use crate::CliError;

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Writes one JSON object per line. Output bytes depend only on `items`.
pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("in-memory values serialize");
        writeln!(w, "{line}").map_err(CliError::io(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

/// Reads a `summaries.jsonl` file written by `summarize`.
pub fn read_summaries(path: &Path) -> Result<Vec<GenerationSummary>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| {
            CliError::Validation(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(s);
    }
    Ok(out)
}

/// A worker pool of `jobs` threads; zero picks one per core.
pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}
