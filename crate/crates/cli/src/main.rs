use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(edprof_cli::cli::run_from(std::env::args_os()))
}
