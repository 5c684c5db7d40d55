//! `conefol`: certification, leaf construction and verification reports.
//!
//! Exit status 0 when every check passes, 1 when a mathematical check
//! fails, 2 on invalid input.

use std::process::ExitCode;

use clap::Parser;
use cone_foliation::error::Error;
use cone_foliation::exec;

mod args;
mod commands;
mod config;
mod output;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or parameters.
    Invalid(String),
    /// A computation that ran but did not satisfy its check.
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Precondition(_)
            | Error::Incompatible { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let jobs = match &cli.command {
        Command::Certify(a) => a.run.jobs,
        Command::Solve(a) => a.run.jobs,
        Command::Foliate(a) => a.solve.run.jobs,
        Command::Calibrate(a) => a.run.jobs,
        Command::Asymptote(a) => a.run.jobs,
        Command::Sweep(a) => a.run.jobs,
    };
    exec::with_jobs(jobs, move || match &cli.command {
        Command::Certify(a) => commands::certify(a),
        Command::Solve(a) => commands::solve(a),
        Command::Foliate(a) => commands::foliate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Asymptote(a) => commands::asymptote(a),
        Command::Sweep(a) => commands::sweep(a),
    })
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => ExitCode::from(1),
        Ok(Err(e)) => report(e),
        Err(_) => {
            eprintln!("conefol: internal error");
            ExitCode::from(1)
        }
    }
}

fn report(e: CliError) -> ExitCode {
    match e {
        CliError::Invalid(m) => {
            eprintln!("conefol: invalid input: {m}");
            ExitCode::from(2)
        }
        CliError::Failed(m) => {
            eprintln!("conefol: {m}");
            ExitCode::from(1)
        }
    }
}
