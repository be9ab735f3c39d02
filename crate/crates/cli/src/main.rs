//! `snowv-lab`: simulate traces, run t-tests, train classifiers, attack keys
//! and render result tables.

mod args;
mod manifest;
mod report;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Process exit status: clean, findings (leaks or a failed attack), or error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Findings,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run::dispatch(&cli.global(), &cli.command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Findings) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
