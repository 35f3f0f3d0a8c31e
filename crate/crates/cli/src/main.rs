//! Batch front end: simulations, DP benchmarks, tuning and equivalent-fuel
//! studies, written as CSV/JSON artifacts.

// `!(x > 0.0)` style checks are deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod experiment;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BenchmarkArgs, CsScanArgs, DpArgs, EfcArgs, SimulateArgs, TuneArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hevem::Error),
}

impl CliError {
    /// 1 for numeric failures, 2 for usage and configuration errors.
    pub fn exit_code(&self) -> u8 {
        use hevem::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.root() {
                E::InvalidParams(_)
                | E::Parse { .. }
                | E::NonMonotonicTime { .. }
                | E::InvalidCycle(_)
                | E::UnknownStage(_)
                | E::Io { .. } => 2,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "hevem", version, about = "Energy management for series hybrid vehicles with engine start-stop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one controller on one cycle.
    Simulate(SimulateArgs),
    /// Compare controllers over a matrix of cycles and fuel models.
    Benchmark(BenchmarkArgs),
    /// Tune charge-sustaining HPTS thresholds.
    Tune(TuneArgs),
    /// Identify equivalence factors.
    Efc(EfcArgs),
    /// Scan DP optima over terminal SOC targets.
    CsScan(CsScanArgs),
    /// Solve the DP benchmark and export value-function slices.
    Dp(DpArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Efc(a) => commands::efc(&a),
        Command::CsScan(a) => commands::cs_scan(&a),
        Command::Dp(a) => commands::dp(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
