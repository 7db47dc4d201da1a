//! Command-line front end: spectral scans, verification reports, resolvent
//! and evolution solves, the Picard demo and the oracle comparison.
//!
//! Every run is a function of one JSON config (flags override its keys).
//! Exit status is 0 when all assertions pass, 1 when one fails and 2 on a
//! configuration error.

mod config;
mod run;

use std::process::ExitCode;

use clap::Parser;

use config::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(run::Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(run::Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
