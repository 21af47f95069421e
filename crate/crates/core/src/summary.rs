//! Single-pass reduction of one logit stream to a per-generation summary.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::ManifestRow;
use crate::metrics::{
    check_temperature, ed_from_entropy, entropy_by, logit_entropy_by, validate_mass_by,
    EdAccumulator, MetricsError, StdConvention,
};
use crate::scalar::Scalar;
use crate::stream::{StreamError, StreamReader, ValueKind, ValueWidth};

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("position {position_index}: {source}")]
    Metrics {
        position_index: u32,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Temperature(MetricsError),
    #[error("position indices must be contiguous from 0: expected {expected}, found {found}")]
    NonContiguous { expected: u32, found: u32 },
    #[error("stream contains no positions")]
    Empty,
    #[error("probability stream was recorded at temperature {recorded:?}, requested {requested}")]
    TemperatureMismatch {
        requested: f64,
        recorded: Option<f64>,
    },
    #[error("stream vocab_size {stream} does not match manifest vocab_size {manifest}")]
    VocabMismatch { stream: u32, manifest: u32 },
    #[error("stream metadata digest does not match its manifest row")]
    DigestMismatch,
}

/// Statistics computed from one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub ed_mean: f64,
    pub ed_std: f64,
    pub length: u32,
    pub unique_token_count: u32,
    /// Mean per-position entropy in nats.
    pub mean_entropy: f64,
    /// Durbin–Watson statistic of the mean-centred per-position ED series;
    /// absent for fewer than two positions or a constant series.
    pub durbin_watson: Option<f64>,
}

/// A stream summary bound to its manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub row: ManifestRow,
    pub ed_mean: f64,
    pub ed_std: f64,
    pub length: u32,
    pub unique_token_count: u32,
    pub mean_entropy: f64,
    #[serde(default)]
    pub durbin_watson: Option<f64>,
}

impl GenerationSummary {
    pub fn from_parts(row: ManifestRow, s: StreamSummary) -> Self {
        GenerationSummary {
            row,
            ed_mean: s.ed_mean,
            ed_std: s.ed_std,
            length: s.length,
            unique_token_count: s.unique_token_count,
            mean_entropy: s.mean_entropy,
            durbin_watson: s.durbin_watson,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SummarizeOptions {
    /// Temperature applied to raw logits. For probability streams it must
    /// equal `recorded_temperature`.
    pub temperature: f64,
    /// Temperature at which probability values were produced, if known.
    pub recorded_temperature: Option<f64>,
    pub std_convention: StdConvention,
}

impl SummarizeOptions {
    pub fn at_temperature(temperature: f64) -> Self {
        SummarizeOptions {
            temperature,
            recorded_temperature: None,
            std_convention: StdConvention::Sample,
        }
    }

    pub fn recorded_at(mut self, t: f64) -> Self {
        self.recorded_temperature = Some(t);
        self
    }
}

/// Bitset over the vocabulary; O(V/8) bytes.
struct TokenSet {
    bits: Vec<u64>,
    count: u32,
}

impl TokenSet {
    fn new(vocab_size: u32) -> Self {
        TokenSet {
            bits: vec![0; (vocab_size as usize).div_ceil(64)],
            count: 0,
        }
    }

    fn insert(&mut self, token: u32) {
        let (w, b) = ((token / 64) as usize, token % 64);
        let mask = 1u64 << b;
        if self.bits[w] & mask == 0 {
            self.bits[w] |= mask;
            self.count += 1;
        }
    }
}

/// Reduces the remaining records of `reader` to a [`StreamSummary`] in one
/// pass, holding one record and O(V) working state.
pub fn summarize_stream<R: Read>(
    reader: &mut StreamReader<R>,
    options: SummarizeOptions,
) -> Result<StreamSummary, SummarizeError> {
    let header = reader.header().clone();
    let vocab = header.vocab_size as usize;
    let temperature = options.temperature;
    check_temperature(temperature).map_err(SummarizeError::Temperature)?;
    if header.value_kind == ValueKind::Probabilities {
        let matches = options
            .recorded_temperature
            .is_some_and(|r| (r - temperature).abs() <= 1e-12);
        if !matches {
            return Err(SummarizeError::TemperatureMismatch {
                requested: temperature,
                recorded: options.recorded_temperature,
            });
        }
    }
    let tolerance = match header.value_width {
        ValueWidth::Binary32 => f32::NORM_TOLERANCE,
        ValueWidth::Binary64 => f64::NORM_TOLERANCE,
    };

    let mut acc = EdAccumulator::new();
    let mut tokens = TokenSet::new(header.vocab_size);
    let mut expected = 0u32;
    while let Some(rec) = reader.next_record()? {
        if rec.position_index != expected {
            return Err(SummarizeError::NonContiguous {
                expected,
                found: rec.position_index,
            });
        }
        let get = |i: usize| rec.value(i);
        let h = match header.value_kind {
            ValueKind::RawLogits => logit_entropy_by(vocab, get, temperature),
            ValueKind::Probabilities => {
                validate_mass_by(vocab, get, tolerance).map_err(|source| {
                    SummarizeError::Metrics {
                        position_index: rec.position_index,
                        source,
                    }
                })?;
                entropy_by(vocab, get)
            }
        };
        acc.push(ed_from_entropy(h, vocab), h);
        tokens.insert(rec.sampled_token_id);
        expected += 1;
    }
    if acc.is_empty() {
        return Err(SummarizeError::Empty);
    }
    Ok(StreamSummary {
        ed_mean: acc.mean().unwrap_or_default(),
        ed_std: acc.std(options.std_convention).unwrap_or_default(),
        length: acc.len() as u32,
        unique_token_count: tokens.count,
        mean_entropy: acc.mean_entropy().unwrap_or_default(),
        durbin_watson: acc.durbin_watson(),
    })
}

/// Summarizes a stream against its manifest row: applies the row
/// temperature, checks vocabulary size and, when the header carries a
/// nonzero digest, that it matches the row.
pub fn summarize_for_row<R: Read>(
    source: R,
    row: &ManifestRow,
    std_convention: StdConvention,
) -> Result<GenerationSummary, SummarizeError> {
    let mut reader = StreamReader::new(source)?;
    let header = reader.header();
    if header.vocab_size != row.vocab_size {
        return Err(SummarizeError::VocabMismatch {
            stream: header.vocab_size,
            manifest: row.vocab_size,
        });
    }
    if header.metadata_digest != [0; 8] && header.metadata_digest != row.digest() {
        return Err(SummarizeError::DigestMismatch);
    }
    let options = SummarizeOptions {
        temperature: row.temperature,
        recorded_temperature: Some(row.temperature),
        std_convention,
    };
    let s = summarize_stream(&mut reader, options)?;
    Ok(GenerationSummary::from_parts(row.clone(), s))
}
