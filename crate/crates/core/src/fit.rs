//! Calibration of the cost models from profiling traces.
//!
//! Timing data is fitted as one pooled linear least-squares problem:
//! one `1/f` slope column per PRB count and one indicator column per MCS,
//! solved by SVD rather than normal equations (the `1/f` columns are close
//! to collinear over 2.8-3.5 GHz).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostModelParams, CpuFrequency, ParamsDocument, DEFAULT_CPU_INTERCEPT,
    DEFAULT_CPU_SLOPE, DEFAULT_T_CONST_US};
use crate::lte::{McsIndex, PrbAllocation};

pub const TIMING_HEADER: [&str; 4] = ["f_ghz", "prb", "mcs", "t_sub_us"];
pub const UTILIZATION_HEADER: [&str; 2] = ["phi_mbps", "cpu_pct"];

/// Relative singular-value cutoff below which the design is rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;
/// Condition numbers above this are reported as a warning flag.
const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unidentifiable: {0}")]
    Unidentifiable(String),
    #[error("all throughput values are equal; slope is undefined")]
    DegenerateX,
    #[error("fit produced non-physical parameters: {0}")]
    NonPhysical(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("unknown CSV header {0:?}")]
    UnknownHeader(String),
    #[error("CSV error: {0}")]
    Csv(String),
}

/// One processing-time observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRecord {
    pub f: CpuFrequency,
    pub prb: PrbAllocation,
    pub mcs: McsIndex,
    pub t_sub_us: f64,
}

impl TimingRecord {
    pub fn new(f: CpuFrequency, prb: PrbAllocation, mcs: McsIndex, t_sub_us: f64) -> Result<Self, FitError> {
        f.require_runnable().map_err(|e| FitError::InvalidRecord(e.to_string()))?;
        if !(t_sub_us.is_finite() && t_sub_us > 0.0) {
            return Err(FitError::InvalidRecord(format!("t_sub_us must be positive, got {t_sub_us}")));
        }
        Ok(TimingRecord { f, prb, mcs, t_sub_us })
    }
}

/// One CPU-utilization observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilizationRecord {
    pub phi_mbps: f64,
    pub cpu_pct: f64,
}

impl UtilizationRecord {
    pub fn new(phi_mbps: f64, cpu_pct: f64) -> Result<Self, FitError> {
        if !(phi_mbps.is_finite() && phi_mbps >= 0.0) {
            return Err(FitError::InvalidRecord(format!("phi_mbps must be non-negative, got {phi_mbps}")));
        }
        if !(cpu_pct.is_finite() && (0.0..=100.0).contains(&cpu_pct)) {
            return Err(FitError::InvalidRecord(format!("cpu_pct must be within 0..=100, got {cpu_pct}")));
        }
        Ok(UtilizationRecord { phi_mbps, cpu_pct })
    }
}

/// How the constant term of the timing model is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstTerm {
    Fixed(f64),
    /// Fit the constant jointly. `beta` of the smallest observed MCS is then
    /// pinned to zero and the constant carries the shared intercept.
    Fitted,
}

impl Default for ConstTerm {
    fn default() -> Self {
        ConstTerm::Fixed(DEFAULT_T_CONST_US)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum FitFlag {
    MonotonicityWarning { detail: String },
    IllConditioned { condition_number: f64 },
    GaugeAnchor { mcs: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: CostModelParams,
    /// Root mean square residual, in us for timing fits and % for CPU fits.
    pub residual_rms: f64,
    /// Sample count per (PRB, MCS); empty for CPU fits.
    pub per_cell_counts: BTreeMap<(u16, u8), usize>,
    pub condition_flags: Vec<FitFlag>,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub residual_rms: f64,
    pub records: usize,
    pub per_cell_counts: BTreeMap<String, usize>,
    pub flags: Vec<FitFlag>,
}

impl FitReport {
    pub fn meta(&self) -> FitMeta {
        FitMeta {
            residual_rms: self.residual_rms,
            records: self.records,
            per_cell_counts: self
                .per_cell_counts
                .iter()
                .map(|((p, m), n)| (format!("{p}:{m}"), *n))
                .collect(),
            flags: self.condition_flags.clone(),
        }
    }

    /// Parameter document with a `fit_meta` section attached.
    pub fn to_document(&self) -> ParamsDocument {
        let mut doc = self.params.to_document();
        doc.fit_meta = Some(serde_json::to_value(self.meta()).expect("fit meta serializes"));
        doc
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    pub fn has_monotonicity_warning(&self) -> bool {
        self.condition_flags
            .iter()
            .any(|f| matches!(f, FitFlag::MonotonicityWarning { .. }))
    }
}

struct LeastSquares {
    coefficients: DVector<f64>,
    residual_rms: f64,
    condition_number: f64,
}

fn solve_least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<LeastSquares, FitError> {
    let n = design.nrows();
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if max_sv.is_nan() || max_sv <= 0.0 || min_sv / max_sv < RANK_TOLERANCE {
        return Err(FitError::Unidentifiable(format!(
            "design matrix is rank deficient (singular values {min_sv:e}..{max_sv:e})"
        )));
    }
    let coefficients = svd
        .solve(&rhs, 0.0)
        .map_err(|e| FitError::Unidentifiable(e.to_string()))?;
    let residuals = &rhs - &design * &coefficients;
    Ok(LeastSquares {
        residual_rms: (residuals.norm_squared() / n as f64).sqrt(),
        condition_number: max_sv / min_sv,
        coefficients,
    })
}

/// Fits `alpha_PRB` and `beta_MCS` (and optionally the constant) to timing records.
pub fn fit_timing(records: &[TimingRecord], constant: ConstTerm) -> Result<FitReport, FitError> {
    if records.is_empty() {
        return Err(FitError::InsufficientData("no timing records".into()));
    }
    let mut cells: BTreeMap<(u16, u8), (usize, BTreeSet<u64>)> = BTreeMap::new();
    for r in records {
        let cell = cells.entry((r.prb.count(), r.mcs.value())).or_default();
        cell.0 += 1;
        cell.1.insert(r.f.value().to_bits());
    }
    if let Some(((p, m), _)) = cells.iter().find(|(_, (_, fs))| fs.len() < 2) {
        return Err(FitError::Unidentifiable(format!(
            "PRB {p} / MCS {m} observed at a single frequency; slope and offset are not separable"
        )));
    }

    let prbs: Vec<u16> = cells.keys().map(|c| c.0).collect::<BTreeSet<_>>().into_iter().collect();
    let mcss: Vec<u8> = cells.keys().map(|c| c.1).collect::<BTreeSet<_>>().into_iter().collect();
    let prb_col: BTreeMap<u16, usize> = prbs.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    // Column layout: [alpha per PRB | beta per MCS (minus the anchor) | const?]
    let (beta_mcss, fixed_const) = match constant {
        ConstTerm::Fixed(c) => {
            if !(c.is_finite() && c >= 0.0) {
                return Err(FitError::InvalidRecord(format!("fixed constant must be non-negative, got {c}")));
            }
            (mcss.clone(), Some(c))
        }
        ConstTerm::Fitted => (mcss[1..].to_vec(), None),
    };
    let mcs_col: BTreeMap<u8, usize> = beta_mcss
        .iter()
        .enumerate()
        .map(|(i, &m)| (m, prbs.len() + i))
        .collect();
    let n_cols = prbs.len() + beta_mcss.len() + usize::from(fixed_const.is_none());
    if records.len() < n_cols {
        return Err(FitError::InsufficientData(format!(
            "{} records for {n_cols} unknowns",
            records.len()
        )));
    }

    let mut design = DMatrix::<f64>::zeros(records.len(), n_cols);
    let mut rhs = DVector::<f64>::zeros(records.len());
    for (row, r) in records.iter().enumerate() {
        design[(row, prb_col[&r.prb.count()])] = 1.0 / r.f.value();
        if let Some(&col) = mcs_col.get(&r.mcs.value()) {
            design[(row, col)] = 1.0;
        }
        match fixed_const {
            Some(c) => rhs[row] = r.t_sub_us - c,
            None => {
                design[(row, n_cols - 1)] = 1.0;
                rhs[row] = r.t_sub_us;
            }
        }
    }

    let solution = solve_least_squares(design, rhs)?;
    let x = &solution.coefficients;

    let alpha: BTreeMap<u16, f64> = prbs.iter().map(|&p| (p, x[prb_col[&p]])).collect();
    let mut beta: BTreeMap<u8, f64> = mcs_col.iter().map(|(&m, &c)| (m, x[c])).collect();
    let mut flags = Vec::new();
    let t_const = match fixed_const {
        Some(c) => c,
        None => {
            beta.insert(mcss[0], 0.0);
            flags.push(FitFlag::GaugeAnchor { mcs: mcss[0] });
            x[n_cols - 1]
        }
    };
    if let Some((p, a)) = alpha.iter().find(|(_, a)| **a <= 0.0) {
        return Err(FitError::NonPhysical(format!("alpha for PRB {p} fitted as {a}")));
    }
    if let Some((m, b)) = beta.iter().find(|(_, b)| **b < 0.0) {
        return Err(FitError::NonPhysical(format!("beta for MCS {m} fitted as {b}")));
    }
    if t_const < 0.0 {
        return Err(FitError::NonPhysical(format!("constant fitted as {t_const}")));
    }

    let params = CostModelParams::new_unordered(alpha, beta, t_const, DEFAULT_CPU_SLOPE, DEFAULT_CPU_INTERCEPT)
        .map_err(|e| FitError::NonPhysical(e.to_string()))?;
    if let Err(CostError::MonotonicityViolation(detail)) = params.check_monotonic() {
        flags.push(FitFlag::MonotonicityWarning { detail });
    }
    if solution.condition_number > CONDITION_WARNING {
        flags.push(FitFlag::IllConditioned { condition_number: solution.condition_number });
    }

    Ok(FitReport {
        params,
        residual_rms: solution.residual_rms,
        per_cell_counts: cells.into_iter().map(|(k, (n, _))| (k, n)).collect(),
        condition_flags: flags,
        records: records.len(),
    })
}

/// Ordinary least-squares line through CPU utilization against downlink rate.
///
/// The returned params carry the fitted line with empty alpha/beta tables.
pub fn fit_cpu_line(records: &[UtilizationRecord]) -> Result<FitReport, FitError> {
    if records.len() < 2 {
        return Err(FitError::InsufficientData(format!(
            "{} utilization records, need at least 2",
            records.len()
        )));
    }
    let first = records[0].phi_mbps;
    if records.iter().all(|r| r.phi_mbps == first) {
        return Err(FitError::DegenerateX);
    }
    let design = DMatrix::from_fn(records.len(), 2, |i, j| if j == 0 { records[i].phi_mbps } else { 1.0 });
    let rhs = DVector::from_iterator(records.len(), records.iter().map(|r| r.cpu_pct));
    let solution = solve_least_squares(design, rhs)?;
    let (slope, intercept) = (solution.coefficients[0], solution.coefficients[1]);
    if slope.is_nan() || slope <= 0.0 {
        return Err(FitError::NonPhysical(format!("CPU slope fitted as {slope}")));
    }
    let params = CostModelParams::new_unordered(BTreeMap::new(), BTreeMap::new(), DEFAULT_T_CONST_US, slope, intercept)
        .map_err(|e| FitError::NonPhysical(e.to_string()))?;
    let mut flags = Vec::new();
    if solution.condition_number > CONDITION_WARNING {
        flags.push(FitFlag::IllConditioned { condition_number: solution.condition_number });
    }
    Ok(FitReport {
        params,
        residual_rms: solution.residual_rms,
        per_cell_counts: BTreeMap::new(),
        condition_flags: flags,
        records: records.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Timing(Vec<TimingRecord>),
    Utilization(Vec<UtilizationRecord>),
}

/// Reads a timing or utilization CSV, dispatching on the exact header.
/// Row numbers in errors count data rows from 1.
pub fn ingest_csv<R: Read>(reader: R) -> Result<Records, FitError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| FitError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let is = |expected: &[&str]| header.len() == expected.len() && header.iter().zip(expected).all(|(a, b)| a == b);

    fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, row: usize) -> Result<T, FitError> {
        let raw = rec.get(i).ok_or_else(|| FitError::MalformedRow { row, reason: format!("missing {name}") })?;
        raw.parse::<T>().map_err(|_| FitError::MalformedRow { row, reason: format!("bad {name} value {raw:?}") })
    }
    let malformed = |row: usize| move |e: String| FitError::MalformedRow { row, reason: e };

    if is(&TIMING_HEADER) {
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| FitError::MalformedRow { row, reason: e.to_string() })?;
            let f = CpuFrequency::ghz(field(&rec, 0, "f_ghz", row)?).map_err(|e| malformed(row)(e.to_string()))?;
            let prb = PrbAllocation::lenient(field(&rec, 1, "prb", row)?).map_err(|e| malformed(row)(e.to_string()))?;
            let mcs = McsIndex::new(field(&rec, 2, "mcs", row)?).map_err(|e| malformed(row)(e.to_string()))?;
            let t: f64 = field(&rec, 3, "t_sub_us", row)?;
            out.push(TimingRecord::new(f, prb, mcs, t).map_err(|e| malformed(row)(e.to_string()))?);
        }
        Ok(Records::Timing(out))
    } else if is(&UTILIZATION_HEADER) {
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| FitError::MalformedRow { row, reason: e.to_string() })?;
            let phi: f64 = field(&rec, 0, "phi_mbps", row)?;
            let cpu: f64 = field(&rec, 1, "cpu_pct", row)?;
            out.push(UtilizationRecord::new(phi, cpu).map_err(|e| malformed(row)(e.to_string()))?);
        }
        Ok(Records::Utilization(out))
    } else {
        Err(FitError::UnknownHeader(header.join(",")))
    }
}

pub fn write_timing_csv<W: Write>(records: &[TimingRecord], writer: W) -> Result<(), FitError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| FitError::Csv(e.to_string());
    w.write_record(TIMING_HEADER).map_err(err)?;
    for r in records {
        w.write_record([
            r.f.value().to_string(),
            r.prb.count().to_string(),
            r.mcs.value().to_string(),
            r.t_sub_us.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| FitError::Csv(e.to_string()))
}

pub fn write_utilization_csv<W: Write>(records: &[UtilizationRecord], writer: W) -> Result<(), FitError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| FitError::Csv(e.to_string());
    w.write_record(UTILIZATION_HEADER).map_err(err)?;
    for r in records {
        w.write_record([r.phi_mbps.to_string(), r.cpu_pct.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| FitError::Csv(e.to_string()))
}

/// Noiseless timing records for every (f, PRB, MCS) combination of the grid.
pub fn generate_timing(
    params: &CostModelParams,
    freqs: &[CpuFrequency],
    prbs: &[PrbAllocation],
    mcss: &[McsIndex],
) -> Result<Vec<TimingRecord>, CostError> {
    let mut out = Vec::with_capacity(freqs.len() * prbs.len() * mcss.len());
    for &prb in prbs {
        for &mcs in mcss {
            for &f in freqs {
                let t = crate::cost::subframe_time(params, f, prb, mcs)?;
                out.push(TimingRecord { f, prb, mcs, t_sub_us: t });
            }
        }
    }
    Ok(out)
}
