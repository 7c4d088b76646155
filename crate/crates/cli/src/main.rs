mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Failure of a subcommand, carrying its exit code category.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or config: exit 1.
    Usage(String),
    /// Unreadable or inconsistent data: exit 2.
    Data(String),
    /// Non-finite losses, failed decompositions, broken identities: exit 3.
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<motifpool::Error> for CliError {
    fn from(e: motifpool::Error) -> Self {
        let msg = e.to_string();
        if matches!(e, motifpool::Error::InvalidArgument(_)) {
            CliError::Usage(msg)
        } else if e.is_data_error() {
            CliError::Data(msg)
        } else {
            CliError::Numerical(msg)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Cluster(a) => commands::cluster(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Motif(a) => commands::motif(&a),
        Command::Metrics(a) => commands::metrics(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.message() });
            eprintln!("{body}");
            ExitCode::from(e.code())
        }
    }
}
