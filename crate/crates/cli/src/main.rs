mod codec;
mod coverage;
mod flips;
mod rangemap;
mod sweep;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Bounded approximate error correction for numeric memory blocks.
#[derive(Parser)]
#[command(name = "rangeguard", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Range map construction.
    Rangemap {
        #[command(subcommand)]
        action: rangemap::RangemapCmd,
    },
    /// Emit the bit-flip impact table of a format.
    AnalyzeFlips(flips::FlipsArgs),
    /// Monte Carlo correction and detection coverage under fault scenarios.
    Coverage(coverage::CoverageArgs),
    /// Post-repair error of a synthetic tensor across bit error rates.
    BerSweep(sweep::SweepArgs),
    /// Protect or check a file with a sidecar redundancy file.
    Codec {
        #[command(subcommand)]
        action: codec::CodecCmd,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or inputs; exit code 2.
    Usage(String),
    /// A structural invariant did not hold; exit code 1.
    Violation(String),
}

impl CliError {
    pub fn usage(e: impl Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                // A closed pipe (`| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Usage(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

pub fn write_json(path: Option<&PathBuf>, value: &serde_json::Value) -> CliResult {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).map_err(CliError::usage)? + "\n";
        std::fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rangemap { action } => rangemap::run(action),
        Command::AnalyzeFlips(a) => flips::run(a),
        Command::Coverage(a) => coverage::run(a),
        Command::BerSweep(a) => sweep::run(a),
        Command::Codec { action } => codec::run(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Violation(msg)) => {
            eprintln!("rangeguard: invariant violated: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("rangeguard: {msg}");
            ExitCode::from(2)
        }
    }
}
