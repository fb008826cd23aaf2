//! `sweep`: evaluate the models along one axis around a base point.

use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use cran_bbu::lte::{self, McsIndex, PrbAllocation};
use cran_bbu::{cost, CostModelParams, CpuFrequency, LinkThroughput};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::input::{load_params, load_scenario};
use crate::output::{csv_string, json_string, write_out, Format};
use crate::predict::link_status;

const MAX_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Frequency,
    Mcs,
    Prb,
    Attenuation,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).multiple(true).args(["scenario", "params"])))]
#[command(group(ArgGroup::new("range").required(true).args(["from", "values"])))]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long, allow_negative_numbers = true, requires_all = ["to", "step"])]
    pub from: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "from")]
    pub to: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "from")]
    pub step: Option<f64>,
    /// Explicit comma-separated axis values instead of a range.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub values: Vec<f64>,
    /// Take the base point from this scenario's RRH and its VM.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// RRH id in the scenario; the first RRH when omitted.
    #[arg(long, requires = "scenario")]
    pub rrh: Option<String>,
    /// Parameter file; replaces the scenario's parameters when both are given.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Override a field of the scenario (or of the parameter file without one).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base CPU frequency in GHz [default: 3.5].
    #[arg(long, allow_negative_numbers = true)]
    pub f: Option<f64>,
    /// Base PRB count [default: 100].
    #[arg(long, allow_negative_numbers = true)]
    pub prb: Option<i64>,
    /// Base MCS [default: 27].
    #[arg(long, allow_negative_numbers = true)]
    pub mcs: Option<i64>,
    /// Base attenuation in dB; link columns stay empty without it.
    #[arg(long, allow_negative_numbers = true)]
    pub atten: Option<f64>,
    /// Base activity factor [default: 1].
    #[arg(long)]
    pub activity: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    f: f64,
    prb: i64,
    mcs: i64,
    atten: Option<f64>,
    activity: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub f_ghz: f64,
    pub freq_class: String,
    pub prb: u16,
    pub mcs: u8,
    pub modulation: &'static str,
    pub bits_per_symbol: u32,
    pub max_dl_rate_mbps: f64,
    pub activity: f64,
    pub offered_rate_mbps: f64,
    pub t_sub_us: f64,
    pub cpu_pct: f64,
    pub overload: bool,
    pub attenuation_db: Option<f64>,
    pub link_mbps: Option<f64>,
    pub link_status: Option<&'static str>,
}

fn base_point(args: &SweepArgs) -> Result<(CostModelParams, Point)> {
    let mut base = Point { f: 3.5, prb: 100, mcs: 27, atten: None, activity: 1.0 };
    let params = match &args.scenario {
        Some(path) => {
            let s = load_scenario(path, &args.set)?;
            let rrh = match &args.rrh {
                Some(id) => s
                    .rrhs
                    .iter()
                    .find(|r| &r.id == id)
                    .ok_or_else(|| CliError::invalid(format!("scenario has no RRH {id:?}")))?,
                None => s.rrhs.first().ok_or_else(|| CliError::invalid("scenario has no RRHs"))?,
            };
            let vm_id = s
                .assignment
                .get(&rrh.id)
                .ok_or_else(|| CliError::invalid(format!("RRH {} is not assigned", rrh.id)))?;
            let vm = s
                .vms
                .iter()
                .find(|v| &v.id == vm_id)
                .ok_or_else(|| CliError::invalid(format!("unknown VM {vm_id:?}")))?;
            base = Point {
                f: vm.f_ghz.value(),
                prb: rrh.prb.count() as i64,
                mcs: rrh.mcs.value() as i64,
                atten: rrh.attenuation_db,
                activity: rrh.activity,
            };
            match &args.params {
                Some(p) => load_params(Some(p), &[])?,
                None => s.params,
            }
        }
        None => load_params(args.params.as_deref(), &args.set)?,
    };
    base.f = args.f.unwrap_or(base.f);
    base.prb = args.prb.unwrap_or(base.prb);
    base.mcs = args.mcs.unwrap_or(base.mcs);
    base.atten = args.atten.or(base.atten);
    base.activity = args.activity.unwrap_or(base.activity);
    Ok((params, base))
}

/// Axis values from an inclusive range; the count comes from an integer
/// number of steps so float drift neither adds nor drops the end point.
pub fn range_points(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) {
        return Err(CliError::invalid("sweep range must be finite"));
    }
    if step <= 0.0 {
        return Err(CliError::invalid(format!("sweep step must be positive, got {step}")));
    }
    if to < from {
        return Err(CliError::invalid(format!("sweep end {to} is below start {from}")));
    }
    let steps = ((to - from) / step + 1e-9).floor();
    if steps >= MAX_POINTS as f64 {
        return Err(CliError::invalid(format!("sweep has more than {MAX_POINTS} points")));
    }
    Ok((0..=steps as usize)
        .map(|i| {
            let x = from + i as f64 * step;
            (x * 1e9).round() / 1e9
        })
        .collect())
}

fn integral(axis: &str, x: f64) -> Result<i64> {
    if x.fract() == 0.0 && x.abs() < 1e9 {
        Ok(x as i64)
    } else {
        Err(CliError::invalid(format!("{axis} value {x} is not an integer")))
    }
}

fn evaluate(params: &CostModelParams, axis: Axis, value: f64, base: Point) -> Result<SweepRow> {
    let mut p = base;
    match axis {
        Axis::Frequency => p.f = value,
        Axis::Mcs => p.mcs = integral("mcs", value)?,
        Axis::Prb => p.prb = integral("prb", value)?,
        Axis::Attenuation => p.atten = Some(value),
    }
    if !(0.0..=1.0).contains(&p.activity) {
        return Err(CliError::invalid(format!("activity {} outside [0, 1]", p.activity)));
    }
    let f = CpuFrequency::ghz(p.f)?;
    let prb = PrbAllocation::lenient(p.prb)?;
    let mcs = McsIndex::new(p.mcs)?;
    let modulation = lte::modulation_of(mcs);
    let rate = lte::max_dl_rate(prb, mcs);
    let offered = rate * p.activity;
    let t = cost::subframe_time(params, f, prb, mcs)?;
    let cpu = cost::cpu_percent(params, offered)?;
    let link = p.atten.map(|a| cost::link_throughput(params.link_table(), a, prb)).transpose()?;
    Ok(SweepRow {
        axis_value: value,
        f_ghz: f.value(),
        freq_class: f.class().to_string(),
        prb: prb.count(),
        mcs: mcs.value(),
        modulation: modulation.name(),
        bits_per_symbol: modulation.bits_per_symbol(),
        max_dl_rate_mbps: rate,
        activity: p.activity,
        offered_rate_mbps: offered,
        t_sub_us: t,
        cpu_pct: cpu.percent,
        overload: cpu.overload,
        attenuation_db: p.atten,
        link_mbps: link.and_then(LinkThroughput::mbps),
        link_status: link.map(link_status),
    })
}

pub fn sweep_rows(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let (params, base) = base_point(args)?;
    let values = match (args.from, args.to, args.step) {
        (Some(from), Some(to), Some(step)) => range_points(from, to, step)?,
        _ => args.values.clone(),
    };
    values.into_iter().map(|v| evaluate(&params, args.axis, v, base)).collect()
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let rows = sweep_rows(&args)?;
    let text = match args.format {
        Format::Csv => csv_string(&rows)?,
        Format::Json => json_string(&rows),
    };
    write_out(args.out.as_deref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_counts_by_steps() {
        let f = range_points(2.8, 3.5, 0.1).unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(f[0], 2.8);
        assert_eq!(f[3], 3.1);
        assert_eq!(f[7], 3.5);
        assert_eq!(range_points(0.0, 27.0, 1.0).unwrap().len(), 28);
        assert_eq!(range_points(60.0, 85.0, 5.0).unwrap(), vec![60.0, 65.0, 70.0, 75.0, 80.0, 85.0]);
        assert_eq!(range_points(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn bad_ranges() {
        assert!(range_points(1.0, 0.0, 0.1).is_err());
        assert!(range_points(0.0, 1.0, 0.0).is_err());
        assert!(range_points(0.0, 1.0, -1.0).is_err());
        assert!(range_points(0.0, f64::NAN, 1.0).is_err());
        assert!(range_points(0.0, 1e9, 1.0).is_err());
    }

    #[test]
    fn integer_axes_reject_fractions() {
        assert_eq!(integral("mcs", 27.0).unwrap(), 27);
        assert!(integral("mcs", 2.5).is_err());
    }
}
