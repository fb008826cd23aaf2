//! `fit-timing` and `fit-cpu`.

use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use cran_bbu::fit::{self, ConstTerm, FitFlag, FitReport, Records};
use cran_bbu::CostModelParams;

use crate::error::{CliError, Result};
use crate::input::load_params;
use crate::output::{sig6, write_out};

#[derive(Debug, Args)]
pub struct FitTimingArgs {
    /// CSV with header f_ghz,prb,mcs,t_sub_us.
    pub input: PathBuf,
    /// Fitted parameter file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Estimate the constant term too (the smallest MCS then gets beta = 0).
    #[arg(long, conflicts_with = "t_const")]
    pub fit_const: bool,
    /// Fixed constant term in us.
    #[arg(long)]
    pub t_const: Option<f64>,
    /// Parameter file whose CPU line and link table are carried over.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FitCpuArgs {
    /// CSV with header phi_mbps,cpu_pct.
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parameter file whose timing tables and link table are carried over.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn ingest(path: &Path) -> Result<Records> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    fit::ingest_csv(file).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn warn_flags(report: &FitReport) {
    for flag in &report.condition_flags {
        match flag {
            FitFlag::MonotonicityWarning { detail } => eprintln!("warning: fitted tables are not monotone: {detail}"),
            FitFlag::IllConditioned { condition_number } => {
                eprintln!("warning: design matrix is ill-conditioned (condition number {})", sig6(*condition_number))
            }
            FitFlag::GaugeAnchor { mcs } => eprintln!("note: beta for MCS {mcs} pinned to 0 to fix the constant"),
        }
    }
}

fn finish(report: &FitReport, out: Option<&Path>, unit: &str) -> Result<()> {
    warn_flags(report);
    write_out(out, &format!("{}\n", report.to_json_pretty()))?;
    if out.is_some() {
        println!("fitted {} records, residual rms {} {unit}", report.records, sig6(report.residual_rms));
    }
    Ok(())
}

pub fn fit_timing(args: FitTimingArgs) -> Result<()> {
    let Records::Timing(records) = ingest(&args.input)? else {
        return Err(CliError::invalid(format!(
            "{}: expected a timing CSV ({})",
            args.input.display(),
            fit::TIMING_HEADER.join(",")
        )));
    };
    let constant = match (args.fit_const, args.t_const) {
        (true, _) => ConstTerm::Fitted,
        (false, Some(t)) => ConstTerm::Fixed(t),
        (false, None) => ConstTerm::default(),
    };
    let mut report = fit::fit_timing(&records, constant)?;
    if let Some(path) = &args.params {
        let base = load_params(Some(path), &args.set)?;
        report.params = report
            .params
            .with_cpu_line(base.cpu_slope(), base.cpu_intercept())?
            .with_link_table(base.link_table().clone());
    }
    finish(&report, args.out.as_deref(), "us")
}

pub fn fit_cpu(args: FitCpuArgs) -> Result<()> {
    let Records::Utilization(records) = ingest(&args.input)? else {
        return Err(CliError::invalid(format!(
            "{}: expected a utilization CSV ({})",
            args.input.display(),
            fit::UTILIZATION_HEADER.join(",")
        )));
    };
    let mut report = fit::fit_cpu_line(&records)?;
    if let Some(path) = &args.params {
        let base: CostModelParams = load_params(Some(path), &args.set)?;
        report.params = base.with_cpu_line(report.params.cpu_slope(), report.params.cpu_intercept())?;
    }
    finish(&report, args.out.as_deref(), "%")
}
