//! Library behind the `edprof` binary. Each subcommand is a `cmd_*`
//! function over a resolved options struct, so it can be driven from tests
//! without a process boundary.

pub mod cli;
pub mod commands;
pub mod config;
mod error;

pub use config::RunConfig;
pub use error::{exit, CliError};
