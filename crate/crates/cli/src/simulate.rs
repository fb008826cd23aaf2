use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;
use cran_bbu::sim;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::input::{load_params, load_scenario};
use crate::output::{json_string, sig6, write_out, Format};

pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const RUN_META: &str = "run_meta.json";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (JSON, schema_version 1).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory for metrics.csv, metrics.json and run_meta.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces the scenario's embedded parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Override a scenario field, e.g. `vms.0.f_ghz=3.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Deadline miss rate above which the run exits with status 3.
    #[arg(long)]
    pub alarm_miss_rate: Option<f64>,
    /// Also print the metrics to stdout in this format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario, &args.set)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(path) = &args.params {
        scenario.params = load_params(Some(path), &[])?;
    }
    if let Some(limit) = args.alarm_miss_rate {
        scenario.alarm_miss_rate = Some(limit);
    }
    let metrics = sim::run(&scenario)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let csv = metrics.to_csv_string();
    let json = format!("{}\n", metrics.to_json_pretty());
    write_out(Some(&args.out.join(METRICS_CSV)), &csv)?;
    write_out(Some(&args.out.join(METRICS_JSON)), &json)?;
    let generated = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "generated_at_unix": generated,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "scenario_file": args.scenario.display().to_string(),
        "scenario_hash": metrics.scenario_hash,
        "seed": metrics.seed,
    });
    write_out(Some(&args.out.join(RUN_META)), &json_string(&meta))?;

    match args.format {
        Some(Format::Csv) => write_out(None, &csv)?,
        Some(Format::Json) => write_out(None, &json)?,
        None => {
            for vm in &metrics.vms {
                println!(
                    "{}: util {} misses {}/{} cpu {} % [{}]{}",
                    vm.id,
                    sig6(vm.accounted_util),
                    vm.deadline_misses,
                    vm.offered_subframes,
                    sig6(vm.predicted_cpu_pct),
                    vm.freq_class,
                    if vm.overload { " OVERLOAD" } else { "" }
                );
            }
            println!("miss rate {}", sig6(metrics.miss_rate()));
        }
    }
    for w in &metrics.warnings {
        eprintln!("warning: {w}");
    }
    let alarms = metrics.alarms(scenario.alarm_miss_rate);
    if alarms.is_empty() {
        Ok(())
    } else {
        Err(CliError::Alarm(alarms.join("; ")))
    }
}
