//! Command-line front end for the `qcd` change-detection toolkit.
//!
//! Exit statuses are stable: 0 on success (and, for `detect`, a detected
//! change), 1 when `detect` finishes without an alarm, 2 for usage and
//! configuration errors, 3 for data and I/O errors.

#![forbid(unsafe_code)]

pub mod commands;
pub mod config;
pub mod data;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_DETECTED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io(_) => EXIT_DATA,
        }
    }
}

impl From<qcd::Error> for CliError {
    fn from(e: qcd::Error) -> Self {
        use qcd::Error::*;
        match e {
            Domain { .. } | NonFinite(_) | EmptySample | InsufficientData { .. } | WindowLength { .. } => {
                CliError::Data(e.to_string())
            }
            FamilyMismatch { .. } | UnsupportedFamily { .. } | InvalidParameter(_) => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qcd", version, about = "Quickest change detection on binned spike trains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Shared {
    /// JSON file with experiment settings; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ExperimentConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trial experiment as a spike CSV.
    Simulate(Shared),
    /// Run a detector over the concatenated trials of a spike CSV.
    Detect {
        /// Spike CSV to analyse.
        data: Option<PathBuf>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Find the threshold reaching a target average run length.
    Calibrate(Shared),
    /// Tabulate false-alarm run length and delay over thresholds.
    Evaluate(Shared),
}

impl Shared {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        Ok(base.overlay(&self.flags))
    }
}

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(shared) => {
            commands::simulate(&shared.resolve()?)?;
            Ok(EXIT_OK)
        }
        Command::Detect { data, shared } => {
            let mut cfg = shared.resolve()?;
            if data.is_some() {
                cfg.input = data;
            }
            let set = commands::load_input(&cfg)?;
            let d = commands::detect(&set, &cfg)?;
            Ok(if d.alarm.is_some() { EXIT_OK } else { EXIT_NOT_DETECTED })
        }
        Command::Calibrate(shared) => {
            commands::calibration(&shared.resolve()?)?;
            Ok(EXIT_OK)
        }
        Command::Evaluate(shared) => {
            commands::evaluate(&shared.resolve()?)?;
            Ok(EXIT_OK)
        }
    }
}
