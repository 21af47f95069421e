//! Line-delimited JSON experiment manifest.
//!
//! One [`ManifestRow`] per line. A row names one generation: the model, the
//! prompt, the sampling temperature and seed, its position in the global run
//! order, and the `.edls` file holding its logits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{Architecture, Language, PromptCategory};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub model_name: String,
    pub architecture: Architecture,
    pub param_count: u64,
    pub vocab_size: u32,
    pub prompt_category: PromptCategory,
    pub prompt_text_ref: String,
    pub language: Language,
    pub temperature: f64,
    pub seed: u64,
    pub generation_index: u32,
    pub stream_path: String,
    /// Token count of the prompt under the model's tokenizer, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_token_count: Option<u32>,
    /// Unicode scalar count of the prompt text, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_char_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chat_template: Option<bool>,
}

impl ManifestRow {
    /// Canonical single-line JSON encoding.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("manifest rows always serialize")
    }

    /// XXH64 of the canonical JSON line, little-endian. Stored in stream
    /// headers to bind a stream to its row.
    pub fn digest(&self) -> [u8; 8] {
        twox_hash::XxHash64::oneshot(0, self.to_json_line().as_bytes()).to_le_bytes()
    }

    /// Identity used for the uniqueness check.
    pub fn key(&self) -> (String, String, u64, u64) {
        (
            self.model_name.clone(),
            self.prompt_text_ref.clone(),
            self.temperature.to_bits(),
            self.seed,
        )
    }

    fn validate(&self, line: usize) -> Result<(), ManifestError> {
        let invalid = |message: String| ManifestError::Invalid { line, message };
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(invalid(format!("temperature {} must be > 0", self.temperature)));
        }
        if self.param_count == 0 {
            return Err(invalid("param_count must be positive".into()));
        }
        if self.vocab_size < 2 {
            return Err(invalid(format!("vocab_size {} is below 2", self.vocab_size)));
        }
        if self.model_name.is_empty() {
            return Err(invalid("model_name is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self, ManifestError> {
        let m = Manifest { rows };
        m.validate()?;
        Ok(m)
    }

    /// Checks per-row constraints, key uniqueness and run-order uniqueness.
    /// Line numbers in errors are 1-based row positions.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut keys = HashSet::new();
        let mut indices = HashSet::new();
        for (i, row) in self.rows.iter().enumerate() {
            let line = i + 1;
            row.validate(line)?;
            if !keys.insert(row.key()) {
                return Err(ManifestError::Invalid {
                    line,
                    message: format!(
                        "duplicate (model, prompt, temperature, seed): ({}, {}, {}, {})",
                        row.model_name, row.prompt_text_ref, row.temperature, row.seed
                    ),
                });
            }
            if !indices.insert(row.generation_index) {
                return Err(ManifestError::Invalid {
                    line,
                    message: format!("duplicate generation_index {}", row.generation_index),
                });
            }
        }
        Ok(())
    }

    pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Self, ManifestError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| ManifestError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: ManifestRow = serde_json::from_str(&line).map_err(|e| ManifestError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        Manifest::new(rows)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, ManifestError> {
        let file = File::open(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_jsonl(BufReader::new(file))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for row in &self.rows {
            w.write_all(row.to_json_line().as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), ManifestError> {
        let io_err = |source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        self.write_to(BufWriter::new(file)).map_err(io_err)
    }

    /// Resolves a row's `stream_path` relative to the manifest's directory.
    pub fn resolve_stream_path(manifest_path: &Path, row: &ManifestRow) -> PathBuf {
        let p = Path::new(&row.stream_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(p)
        }
    }
}
