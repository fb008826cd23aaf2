//! `bbupool`: cost-model predictions, parameter fitting, sweeps and pool
//! simulations for virtualized LTE baseband units.
//!
//! Exit status: 0 success, 1 I/O error, 2 invalid input, 3 alarm.

mod error;
mod fit;
mod input;
mod output;
mod predict;
mod simulate;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bbupool", version, about = "BBU pool cost models and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a pool simulation and write metrics files.
    Simulate(simulate::SimulateArgs),
    /// Fit alpha/beta timing tables from a timing CSV.
    FitTiming(fit::FitTimingArgs),
    /// Fit the CPU utilization line from a utilization CSV.
    FitCpu(fit::FitCpuArgs),
    /// Predict subframe processing time.
    PredictTime(predict::PredictTimeArgs),
    /// Predict CPU utilization for a downlink rate.
    PredictCpu(predict::PredictCpuArgs),
    /// LTE rate, UE power and link throughput for a PRB/MCS pair.
    Rate(predict::RateArgs),
    /// Evaluate the models along one axis, one CSV/JSON row per point.
    Sweep(sweep::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::simulate(a),
        Command::FitTiming(a) => fit::fit_timing(a),
        Command::FitCpu(a) => fit::fit_cpu(a),
        Command::PredictTime(a) => predict::predict_time(a),
        Command::PredictCpu(a) => predict::predict_cpu(a),
        Command::Rate(a) => predict::rate(a),
        Command::Sweep(a) => sweep::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let label = match e {
                error::CliError::Alarm(_) => "alarm",
                _ => "error",
            };
            eprintln!("{label}: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
