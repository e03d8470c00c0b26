mod args;
mod commands;
mod data;
mod output;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input, invalid configuration: exit 2.
    Usage(String),
    /// A check ran and did not pass: exit 1.
    Check(String),
    /// Training produced a non-finite loss, gradient or parameter: exit 3.
    Numeric(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {err}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<moment_match::Error> for CliError {
    fn from(e: moment_match::Error) -> Self {
        match e {
            moment_match::Error::Diverged { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

const THREADS_VAR: &str = "MOMENT_MATCH_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads = raw
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Discrepancy(a) => commands::discrepancy(a),
        Command::Train(a) => commands::train(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Activations(a) => commands::activations(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
