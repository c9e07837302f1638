//! Command-line front end: sweeps, oracle grids, Monte Carlo cells, the
//! statistical-sum study, and the `verify` battery.

use std::io::Write;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub mod commands;
pub mod settings;
pub mod verify;

pub use settings::{Format, Opts, Settings};
pub use verify::{run_verify, VerifyReport};

#[derive(Parser, Debug)]
#[command(name = "bscx", version, about = "Random-coding error exponents of the binary symmetric channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sweep rates and print every closed-form quantity.
    Exponents(Opts),
    /// Exact ensemble error probability over a grid of block lengths.
    Oracle(Opts),
    /// Monte Carlo estimates, one row per (rate, n) cell.
    Simulate(Opts),
    /// Concentration study of the statistical sum at z = p / (1 - p).
    Statsum(Opts),
    /// Run the full cross-check battery and write a JSON report.
    Verify(Opts),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Consistency(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<bsc_exponent::Error> for CliError {
    fn from(e: bsc_exponent::Error) -> Self {
        use bsc_exponent::Error as E;
        match e {
            E::OutOfRange { .. } | E::Invalid(_) | E::Grid { .. } | E::Cap { .. } | E::NaN => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Serialize rows as CSV (header from field names) or as a JSON array.
pub fn render_rows<C: Serialize, J: Serialize>(format: Format, csv_rows: &[C], json_rows: &[J]) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in csv_rows {
                w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
        }
        Format::Json => to_json(json_rows),
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn emit(settings: &Settings, bytes: &[u8]) -> Result<(), CliError> {
    match &settings.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

/// Run one parsed invocation, writing its output.
pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Exponents(o) => {
            let s = o.resolve(&commands::EXPONENT_DEFAULTS)?;
            emit(&s, &commands::exponents(&s)?)
        }
        Command::Oracle(o) => {
            let s = o.resolve(&commands::ORACLE_DEFAULTS)?;
            emit(&s, &commands::oracle(&s)?)
        }
        Command::Simulate(o) => {
            let s = o.resolve(&commands::SIMULATE_DEFAULTS)?;
            emit(&s, &commands::simulate(&s)?)
        }
        Command::Statsum(o) => {
            let s = o.resolve(&commands::STATSUM_DEFAULTS)?;
            emit(&s, &commands::statsum(&s)?)
        }
        Command::Verify(o) => {
            let s = o.resolve(&verify::VERIFY_DEFAULTS)?;
            if s.format == Format::Csv {
                return Err(CliError::Usage("verify writes JSON only".into()));
            }
            let report = run_verify(&s)?;
            emit(&s, &to_json(&report)?)?;
            match report.failed_checks() {
                failed if failed.is_empty() => Ok(()),
                failed => Err(CliError::Consistency(failed.join(", "))),
            }
        }
    }
}
