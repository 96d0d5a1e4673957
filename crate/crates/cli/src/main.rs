//! `ddbound` command-line front end.
//!
//! Exit codes: 0 success, 1 a checked assertion failed, 2 invalid input,
//! 3 numerical non-convergence.

mod args;
mod commands;
mod failure;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::failure::Failure;

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DDBOUND_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Invalid(format!("DDBOUND_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Invalid(format!("cannot size the worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match configure_threads().and_then(|()| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("ddbound: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
