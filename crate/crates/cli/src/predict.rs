//! Single-point model evaluations: `predict-time`, `predict-cpu`, `rate`.

use std::path::PathBuf;

use clap::Args;
use cran_bbu::lte::{self, McsIndex, PowerDbm, PrbAllocation};
use cran_bbu::{cost, CpuFrequency, LinkThroughput};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::input::load_params;
use crate::output::{emit, sig6, Format};

#[derive(Debug, Args)]
pub struct PredictTimeArgs {
    /// Parameter file (JSON).
    #[arg(long)]
    pub params: PathBuf,
    /// Override a parameter field, e.g. `alpha_prb.25=700`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// CPU frequency in GHz.
    #[arg(long, allow_negative_numbers = true)]
    pub f: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub prb: i64,
    #[arg(long, allow_negative_numbers = true)]
    pub mcs: i64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Serialize)]
struct TimeRecord {
    f_ghz: f64,
    prb: u16,
    mcs: u8,
    t_sub_us: f64,
    freq_class: String,
}

pub fn predict_time(args: PredictTimeArgs) -> Result<()> {
    let params = load_params(Some(&args.params), &args.set)?;
    let f = CpuFrequency::ghz(args.f)?;
    let prb = PrbAllocation::lenient(args.prb)?;
    let mcs = McsIndex::new(args.mcs)?;
    let t = cost::subframe_time(&params, f, prb, mcs)?;
    let class = f.class().to_string();
    let human = format!("{} us [{class}]", sig6(t));
    let record = TimeRecord { f_ghz: f.value(), prb: prb.count(), mcs: mcs.value(), t_sub_us: t, freq_class: class };
    emit(&record, &human, args.format)
}

#[derive(Debug, Args)]
pub struct PredictCpuArgs {
    /// Parameter file (JSON); the default CPU line is used when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Downlink rate in Mbps.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["prb", "mcs"], required_unless_present_all = ["prb", "mcs"])]
    pub phi: Option<f64>,
    /// Derive the rate from a PRB count and MCS instead of `--phi`.
    #[arg(long, requires = "mcs", allow_negative_numbers = true)]
    pub prb: Option<i64>,
    #[arg(long, requires = "prb", allow_negative_numbers = true)]
    pub mcs: Option<i64>,
    /// Fraction of subframes carrying traffic, scales the derived rate.
    #[arg(long, default_value_t = 1.0, requires = "prb")]
    pub activity: f64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Serialize)]
struct CpuRecord {
    phi_mbps: f64,
    cpu_pct: f64,
    overload: bool,
}

pub fn predict_cpu(args: PredictCpuArgs) -> Result<()> {
    let params = load_params(args.params.as_deref(), &args.set)?;
    let phi = match (args.phi, args.prb, args.mcs) {
        (Some(phi), _, _) => phi,
        (None, Some(prb), Some(mcs)) => {
            if !(0.0..=1.0).contains(&args.activity) {
                return Err(CliError::invalid(format!("activity {} outside [0, 1]", args.activity)));
            }
            lte::max_dl_rate(PrbAllocation::lenient(prb)?, McsIndex::new(mcs)?) * args.activity
        }
        _ => unreachable!("clap requires --phi or --prb with --mcs"),
    };
    let load = cost::cpu_percent(&params, phi)?;
    let flag = if load.overload { "OVERLOAD" } else { "OK" };
    let human = format!("{} % [{flag}]", sig6(load.percent));
    emit(&CpuRecord { phi_mbps: phi, cpu_pct: load.percent, overload: load.overload }, &human, args.format)
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub prb: i64,
    #[arg(long, allow_negative_numbers = true)]
    pub mcs: i64,
    /// Accept any PRB count in 0..=100, not just 25/50/100.
    #[arg(long)]
    pub extended: bool,
    /// PDSCH EPRE in dBm; adds the UE maximum power.
    #[arg(long, allow_negative_numbers = true)]
    pub epre: Option<f64>,
    /// Path attenuation in dB; adds the link throughput.
    #[arg(long, allow_negative_numbers = true)]
    pub atten: Option<f64>,
    /// Parameter file supplying the link table.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Serialize)]
struct RateRecord {
    prb: u16,
    mcs: u8,
    modulation: &'static str,
    bits_per_symbol: u32,
    symbol_rate_msps: f64,
    max_dl_rate_mbps: f64,
    max_ue_power_dbm: Option<f64>,
    attenuation_db: Option<f64>,
    link_mbps: Option<f64>,
    link_status: Option<&'static str>,
}

pub fn link_status(link: LinkThroughput) -> &'static str {
    match link {
        LinkThroughput::Rate(_) => "CONNECTED",
        LinkThroughput::Dropped => "DROPPED",
    }
}

pub fn rate(args: RateArgs) -> Result<()> {
    let prb = if args.extended { PrbAllocation::extended(args.prb)? } else { PrbAllocation::strict(args.prb)? };
    let mcs = McsIndex::new(args.mcs)?;
    let modulation = lte::modulation_of(mcs);
    let power = args.epre.map(PowerDbm::new).transpose()?.map(|p| lte::max_ue_power(p, prb).value());
    let link = match args.atten {
        Some(a) => {
            let params = load_params(args.params.as_deref(), &args.set)?;
            Some(cost::link_throughput(params.link_table(), a, prb)?)
        }
        None => None,
    };
    let record = RateRecord {
        prb: prb.count(),
        mcs: mcs.value(),
        modulation: modulation.name(),
        bits_per_symbol: modulation.bits_per_symbol(),
        symbol_rate_msps: lte::symbol_rate(prb),
        max_dl_rate_mbps: lte::max_dl_rate(prb, mcs),
        max_ue_power_dbm: power,
        attenuation_db: args.atten,
        link_mbps: link.and_then(LinkThroughput::mbps),
        link_status: link.map(link_status),
    };
    let mut human = format!(
        "{} Mbps ({}, {} bits/symbol, {} Msym/s)",
        sig6(record.max_dl_rate_mbps),
        record.modulation,
        record.bits_per_symbol,
        sig6(record.symbol_rate_msps)
    );
    if let Some(p) = power {
        human.push_str(&format!("\nUE max power {} dBm", sig6(p)));
    }
    if let (Some(a), Some(l)) = (args.atten, link) {
        let shown = l.mbps().map_or("DROPPED".to_string(), |m| format!("{} Mbps", sig6(m)));
        human.push_str(&format!("\nlink at {} dB: {shown}", sig6(a)));
    }
    emit(&record, &human, args.format)
}
