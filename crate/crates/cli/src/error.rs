use std::io;
use std::path::{Path, PathBuf};

use edprof::manifest::ManifestError;
use edprof::prompts::PromptError;
use edprof::synth::SynthError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const PARTIAL_FAILURE: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or analysis names.
    #[error("{0}")]
    Usage(String),
    /// Input files that parse but violate their contracts.
    #[error("{0}")]
    Validation(String),
    #[error("{failed} of {total} generations failed; see {}", failures.display())]
    PartialFailure {
        failed: usize,
        total: usize,
        failures: PathBuf,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::PartialFailure { .. } => exit::PARTIAL_FAILURE,
            CliError::Io { .. } => exit::IO,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Validation(format!("manifest {other}")),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Io { path, source } => CliError::Io { path, source },
            PromptError::MissingCorpus(path) => CliError::Io {
                path,
                source: io::Error::new(io::ErrorKind::NotFound, "corpus directory not found"),
            },
            PromptError::EmptyCorpus(path) => CliError::Io {
                path,
                source: io::Error::new(io::ErrorKind::NotFound, "no .txt files in corpus directory"),
            },
            PromptError::InvalidUtf8(_) => CliError::Validation(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidParam(m) => CliError::Usage(format!("synth: {m}")),
            SynthError::Stream(s) => CliError::Validation(s.to_string()),
        }
    }
}
