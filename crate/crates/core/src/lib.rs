//! Entropic deviation (ED) profiling for language-model next-token
//! distributions.
//!
//! ED measures how far a distribution `p` over a vocabulary of size `V` is
//! from uniform: `ED(p) = 1 − H(p)/ln V`, so 0 for uniform and 1 for a point
//! mass. This crate covers the measurement path end to end: the `.edls`
//! logit-stream format, per-generation summaries, prompt-suite generation,
//! the statistical procedures and falsification battery run over summaries,
//! tokenizer-level multilingual analysis and a planted-regime synthesizer
//! for validating the pipeline without a model.
//!
//! Metric code is generic over the element type ([`Scalar`], implemented for
//! `f32` and `f64`); accumulation always happens in `f64`.

pub mod battery;
pub mod manifest;
pub mod metrics;
pub mod multilingual;
pub mod prompts;
pub mod scalar;
pub mod stats;
pub mod stream;
pub mod summary;
pub mod synth;
pub mod taxonomy;

pub use manifest::{Manifest, ManifestRow};
pub use metrics::{
    ed, ed_sequence, entropy, entropy_to_perplexity, kl_from_uniform, logit_ed, logit_entropy,
    softmax_with_temperature, zipf_ed, EdAccumulator, LogitVector, MetricsError, ProbDist,
    SequenceEdProfile, StdConvention, ZipfParams,
};
pub use scalar::Scalar;
pub use stream::{
    read_stream, write_stream, PositionRecord, RecordValues, StreamError, StreamHeader,
    StreamReader, StreamWriter, ValueKind, ValueWidth,
};
pub use summary::{summarize_stream, GenerationSummary, StreamSummary, SummarizeOptions};
pub use taxonomy::{Architecture, Language, PromptCategory, PromptClass};

pub type ProbDist32 = ProbDist<f32>;
pub type ProbDist64 = ProbDist<f64>;
pub type LogitVector32 = LogitVector<f32>;
pub type LogitVector64 = LogitVector<f64>;
