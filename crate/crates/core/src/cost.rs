//! Empirical BBU cost models.
//!
//! * Subframe processing time: `T_sub[us] = alpha_PRB / f + beta_MCS + t_const`,
//!   with `f` in GHz and `alpha` in us*GHz (the same model as with `f` in Hz,
//!   just better scaled numbers).
//! * CPU utilization of the 4-core reference VM as an affine function of the
//!   maximum downlink rate: `CPU[%] = 0.6237 phi + 21.3544`.
//! * Achievable downlink throughput against RF attenuation, with the
//!   connection dropping above 80 dB.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lte::{McsIndex, PrbAllocation};

/// Below this frequency the eNB loses synchronization with the UE.
pub const MIN_FREQUENCY_GHZ: f64 = 2.5;
/// Lower edge of the profiled frequency range.
pub const VALIDATED_MIN_GHZ: f64 = 2.8;
/// Upper edge of the profiled frequency range.
pub const VALIDATED_MAX_GHZ: f64 = 3.5;

/// Constant term of the processing-time model, in microseconds.
pub const DEFAULT_T_CONST_US: f64 = 2.508;
/// CPU percentage per Mbps of maximum downlink rate.
pub const DEFAULT_CPU_SLOPE: f64 = 0.6237;
/// CPU percentage at zero downlink rate.
pub const DEFAULT_CPU_INTERCEPT: f64 = 21.3544;
/// Attenuation beyond which the eNB-UE connection drops.
pub const DEFAULT_DROP_THRESHOLD_DB: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("CPU frequency {0} GHz is below the 2.5 GHz minimum for running the eNB")]
    FrequencyBelowMinimum(f64),
    #[error("CPU frequency {0} is not a positive finite number of GHz")]
    InvalidFrequency(f64),
    #[error("no {kind} parameter for {key}")]
    UnknownParameter { kind: &'static str, key: u16 },
    #[error("negative throughput {0} Mbps")]
    NegativeThroughput(f64),
    #[error("link table has no entries for {0} PRBs")]
    UnknownPrb(u16),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("monotonicity violation: {0}")]
    MonotonicityViolation(String),
    #[error("invalid link table: {0}")]
    InvalidLinkTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrequencyClass {
    Invalid,
    Marginal,
    Validated,
    Extrapolated,
}

impl fmt::Display for FrequencyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrequencyClass::Invalid => "INVALID",
            FrequencyClass::Marginal => "MARGINAL",
            FrequencyClass::Validated => "VALIDATED",
            FrequencyClass::Extrapolated => "EXTRAPOLATED",
        })
    }
}

/// CPU clock frequency in GHz. Any positive value constructs; use
/// [`CpuFrequency::class`] to see where it sits relative to the profiled range.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CpuFrequency(f64);

impl CpuFrequency {
    pub fn ghz(value: f64) -> Result<Self, CostError> {
        if value.is_finite() && value > 0.0 {
            Ok(CpuFrequency(value))
        } else {
            Err(CostError::InvalidFrequency(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn class(self) -> FrequencyClass {
        match self.0 {
            f if f < MIN_FREQUENCY_GHZ => FrequencyClass::Invalid,
            f if f < VALIDATED_MIN_GHZ => FrequencyClass::Marginal,
            f if f <= VALIDATED_MAX_GHZ => FrequencyClass::Validated,
            _ => FrequencyClass::Extrapolated,
        }
    }

    /// Fails with `FrequencyBelowMinimum` for INVALID frequencies.
    pub fn require_runnable(self) -> Result<FrequencyClass, CostError> {
        match self.class() {
            FrequencyClass::Invalid => Err(CostError::FrequencyBelowMinimum(self.0)),
            c => Ok(c),
        }
    }
}

impl TryFrom<f64> for CpuFrequency {
    type Error = CostError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        CpuFrequency::ghz(value)
    }
}

impl From<CpuFrequency> for f64 {
    fn from(f: CpuFrequency) -> f64 {
        f.0
    }
}

/// One measured point of the attenuation/throughput curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRow {
    pub atten_db: f64,
    pub prb: u16,
    pub mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "mbps")]
pub enum LinkThroughput {
    Rate(f64),
    Dropped,
}

impl LinkThroughput {
    pub fn mbps(self) -> Option<f64> {
        match self {
            LinkThroughput::Rate(r) => Some(r),
            LinkThroughput::Dropped => None,
        }
    }
}

/// Attenuation to achievable-throughput table, interpolated linearly in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkQualityTable {
    // per PRB count, points sorted by attenuation
    curves: BTreeMap<u16, Vec<(f64, f64)>>,
    drop_threshold_db: f64,
}

impl LinkQualityTable {
    pub fn new(rows: &[LinkRow], drop_threshold_db: f64) -> Result<Self, CostError> {
        if !drop_threshold_db.is_finite() {
            return Err(CostError::InvalidLinkTable("drop threshold must be finite".into()));
        }
        let mut curves: BTreeMap<u16, Vec<(f64, f64)>> = BTreeMap::new();
        for row in rows {
            if !row.atten_db.is_finite() || !row.mbps.is_finite() {
                return Err(CostError::InvalidLinkTable(format!("non-finite row {row:?}")));
            }
            curves.entry(row.prb).or_default().push((row.atten_db, row.mbps));
        }
        for (prb, points) in curves.iter_mut() {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            if points.len() < 2 {
                return Err(CostError::InvalidLinkTable(format!(
                    "PRB {prb} needs at least two attenuation points"
                )));
            }
            for w in points.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(CostError::InvalidLinkTable(format!(
                        "PRB {prb} has duplicate attenuation {} dB",
                        w[0].0
                    )));
                }
                if w[1].1 > w[0].1 {
                    return Err(CostError::InvalidLinkTable(format!(
                        "PRB {prb} throughput increases between {} and {} dB",
                        w[0].0, w[1].0
                    )));
                }
            }
            if let Some(p) = points.iter().find(|p| p.0 <= drop_threshold_db && p.1 <= 0.0) {
                return Err(CostError::InvalidLinkTable(format!(
                    "PRB {prb} has non-positive throughput at {} dB",
                    p.0
                )));
            }
        }
        Ok(LinkQualityTable { curves, drop_threshold_db })
    }

    /// Throughputs at 60 and 80 dB for 25/50/100 PRBs, dropping above 80 dB.
    pub fn measured() -> Self {
        let rows = [
            LinkRow { atten_db: 60.0, prb: 25, mbps: 5.0 },
            LinkRow { atten_db: 60.0, prb: 50, mbps: 10.0 },
            LinkRow { atten_db: 60.0, prb: 100, mbps: 20.0 },
            LinkRow { atten_db: 80.0, prb: 25, mbps: 0.98 },
            LinkRow { atten_db: 80.0, prb: 50, mbps: 1.64 },
            LinkRow { atten_db: 80.0, prb: 100, mbps: 3.40 },
        ];
        LinkQualityTable::new(&rows, DEFAULT_DROP_THRESHOLD_DB).expect("measured table is valid")
    }

    pub fn drop_threshold_db(&self) -> f64 {
        self.drop_threshold_db
    }

    pub fn rows(&self) -> Vec<LinkRow> {
        let mut rows: Vec<LinkRow> = self
            .curves
            .iter()
            .flat_map(|(&prb, pts)| pts.iter().map(move |&(atten_db, mbps)| LinkRow { atten_db, prb, mbps }))
            .collect();
        rows.sort_by(|a, b| a.atten_db.total_cmp(&b.atten_db).then(a.prb.cmp(&b.prb)));
        rows
    }

    pub fn link_throughput(&self, attenuation_db: f64, prb: PrbAllocation) -> Result<LinkThroughput, CostError> {
        let points = self.curves.get(&prb.count()).ok_or(CostError::UnknownPrb(prb.count()))?;
        if attenuation_db > self.drop_threshold_db {
            return Ok(LinkThroughput::Dropped);
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if attenuation_db <= first.0 {
            return Ok(LinkThroughput::Rate(first.1));
        }
        if attenuation_db >= last.0 {
            return Ok(LinkThroughput::Rate(last.1));
        }
        let i = points.partition_point(|p| p.0 <= attenuation_db);
        let (a0, t0) = points[i - 1];
        let (a1, t1) = points[i];
        if attenuation_db == a0 {
            return Ok(LinkThroughput::Rate(t0));
        }
        let w = (attenuation_db - a0) / (a1 - a0);
        Ok(LinkThroughput::Rate(t0 + w * (t1 - t0)))
    }
}

impl Default for LinkQualityTable {
    fn default() -> Self {
        LinkQualityTable::measured()
    }
}

/// Result of evaluating the CPU model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuLoad {
    pub percent: f64,
    /// Set when the prediction exceeds 100 %; the value is not clamped.
    pub overload: bool,
}

/// Calibrated model coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsDocument", into = "ParamsDocument")]
pub struct CostModelParams {
    alpha_prb: BTreeMap<u16, f64>,
    beta_mcs: BTreeMap<u8, f64>,
    t_const: f64,
    cpu_slope: f64,
    cpu_intercept: f64,
    link_table: LinkQualityTable,
}

impl CostModelParams {
    /// Validated construction; alpha and beta must be non-decreasing.
    pub fn new(
        alpha_prb: BTreeMap<u16, f64>,
        beta_mcs: BTreeMap<u8, f64>,
        t_const: f64,
        cpu_slope: f64,
        cpu_intercept: f64,
    ) -> Result<Self, CostError> {
        let p = Self::new_unordered(alpha_prb, beta_mcs, t_const, cpu_slope, cpu_intercept)?;
        p.check_monotonic()?;
        Ok(p)
    }

    /// Like [`CostModelParams::new`] but tolerates non-monotone tables.
    /// Used for fit output, where noise can reorder neighbouring cells.
    pub fn new_unordered(
        alpha_prb: BTreeMap<u16, f64>,
        beta_mcs: BTreeMap<u8, f64>,
        t_const: f64,
        cpu_slope: f64,
        cpu_intercept: f64,
    ) -> Result<Self, CostError> {
        let bad = |msg: String| Err(CostError::SchemaViolation(msg));
        for (&k, &a) in &alpha_prb {
            PrbAllocation::lenient(k as i64).map_err(|e| CostError::SchemaViolation(e.to_string()))?;
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("alpha for PRB {k} must be positive, got {a}"));
            }
        }
        for (&k, &b) in &beta_mcs {
            McsIndex::new(k as i64).map_err(|e| CostError::SchemaViolation(e.to_string()))?;
            if !(b.is_finite() && b >= 0.0) {
                return bad(format!("beta for MCS {k} must be non-negative, got {b}"));
            }
        }
        if !(t_const.is_finite() && t_const >= 0.0) {
            return bad(format!("t_const must be non-negative, got {t_const}"));
        }
        if !(cpu_slope.is_finite() && cpu_slope > 0.0) {
            return bad(format!("cpu_slope must be positive, got {cpu_slope}"));
        }
        if !cpu_intercept.is_finite() {
            return bad(format!("cpu_intercept must be finite, got {cpu_intercept}"));
        }
        Ok(CostModelParams {
            alpha_prb,
            beta_mcs,
            t_const,
            cpu_slope,
            cpu_intercept,
            link_table: LinkQualityTable::measured(),
        })
    }

    /// Built-in tables for running without calibration data.
    ///
    /// The alpha/beta values are synthetic placeholders chosen to be
    /// monotone and of plausible magnitude; they are not measurements.
    /// Calibrate real values with [`crate::fit::fit_timing`].
    pub fn synthetic_default() -> Self {
        let alpha = BTreeMap::from([(25, 700.0), (50, 1300.0), (100, 2500.0)]);
        let beta = McsIndex::all().map(|m| (m.value(), 20.0 + 3.0 * m.value() as f64)).collect();
        CostModelParams::new(alpha, beta, DEFAULT_T_CONST_US, DEFAULT_CPU_SLOPE, DEFAULT_CPU_INTERCEPT)
            .expect("synthetic defaults are valid")
    }

    pub fn with_link_table(mut self, table: LinkQualityTable) -> Self {
        self.link_table = table;
        self
    }

    pub fn with_cpu_line(mut self, slope: f64, intercept: f64) -> Result<Self, CostError> {
        let checked = Self::new_unordered(BTreeMap::new(), BTreeMap::new(), self.t_const, slope, intercept)?;
        self.cpu_slope = checked.cpu_slope;
        self.cpu_intercept = checked.cpu_intercept;
        Ok(self)
    }

    pub fn alpha(&self, prb: PrbAllocation) -> Option<f64> {
        self.alpha_prb.get(&prb.count()).copied()
    }

    pub fn beta(&self, mcs: McsIndex) -> Option<f64> {
        self.beta_mcs.get(&mcs.value()).copied()
    }

    pub fn alpha_table(&self) -> &BTreeMap<u16, f64> {
        &self.alpha_prb
    }

    pub fn beta_table(&self) -> &BTreeMap<u8, f64> {
        &self.beta_mcs
    }

    pub fn t_const(&self) -> f64 {
        self.t_const
    }

    pub fn cpu_slope(&self) -> f64 {
        self.cpu_slope
    }

    pub fn cpu_intercept(&self) -> f64 {
        self.cpu_intercept
    }

    pub fn link_table(&self) -> &LinkQualityTable {
        &self.link_table
    }

    pub fn check_monotonic(&self) -> Result<(), CostError> {
        fn first_drop<K: Copy + fmt::Display>(m: &BTreeMap<K, f64>) -> Option<(K, K)> {
            let v: Vec<_> = m.iter().collect();
            v.windows(2).find(|w| w[1].1 < w[0].1).map(|w| (*w[0].0, *w[1].0))
        }
        if let Some((lo, hi)) = first_drop(&self.alpha_prb) {
            return Err(CostError::MonotonicityViolation(format!(
                "alpha({hi}) < alpha({lo}); alpha must not decrease with PRB"
            )));
        }
        if let Some((lo, hi)) = first_drop(&self.beta_mcs) {
            return Err(CostError::MonotonicityViolation(format!(
                "beta({hi}) < beta({lo}); beta must not decrease with MCS"
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> ParamsDocument {
        ParamsDocument::from(self.clone())
    }
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams::synthetic_default()
    }
}

/// Subframe processing time in microseconds.
pub fn subframe_time(
    params: &CostModelParams,
    f: CpuFrequency,
    prb: PrbAllocation,
    mcs: McsIndex,
) -> Result<f64, CostError> {
    f.require_runnable()?;
    let alpha = params
        .alpha(prb)
        .ok_or(CostError::UnknownParameter { kind: "alpha_prb", key: prb.count() })?;
    let beta = params
        .beta(mcs)
        .ok_or(CostError::UnknownParameter { kind: "beta_mcs", key: mcs.value() as u16 })?;
    Ok(alpha / f.value() + beta + params.t_const)
}

/// CPU utilization predicted for a maximum downlink rate `phi_mbps`.
pub fn cpu_percent(params: &CostModelParams, phi_mbps: f64) -> Result<CpuLoad, CostError> {
    if phi_mbps.is_nan() || phi_mbps < 0.0 {
        return Err(CostError::NegativeThroughput(phi_mbps));
    }
    let percent = params.cpu_slope * phi_mbps + params.cpu_intercept;
    Ok(CpuLoad { percent, overload: percent > 100.0 })
}

pub fn link_throughput(
    table: &LinkQualityTable,
    attenuation_db: f64,
    prb: PrbAllocation,
) -> Result<LinkThroughput, CostError> {
    table.link_throughput(attenuation_db, prb)
}

/// Parses and validates a JSON parameter document.
pub fn load_params(source: &str) -> Result<CostModelParams, CostError> {
    let doc: ParamsDocument =
        serde_json::from_str(source).map_err(|e| CostError::SchemaViolation(e.to_string()))?;
    CostModelParams::try_from(doc)
}

/// On-disk JSON form of [`CostModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDocument {
    pub alpha_prb: BTreeMap<String, f64>,
    pub beta_mcs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_const_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_table: Option<Vec<LinkRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_threshold_db: Option<f64>,
    /// Fit diagnostics; ignored when loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_meta: Option<serde_json::Value>,
}

fn parse_keys<K: std::str::FromStr + Ord>(
    map: &BTreeMap<String, f64>,
    what: &str,
) -> Result<BTreeMap<K, f64>, CostError> {
    map.iter()
        .map(|(k, &v)| {
            k.trim()
                .parse::<K>()
                .map(|k| (k, v))
                .map_err(|_| CostError::SchemaViolation(format!("{what} key {k:?} is not an integer")))
        })
        .collect()
}

impl TryFrom<ParamsDocument> for CostModelParams {
    type Error = CostError;

    fn try_from(doc: ParamsDocument) -> Result<Self, Self::Error> {
        let alpha = parse_keys::<u16>(&doc.alpha_prb, "alpha_prb")?;
        let beta = parse_keys::<u8>(&doc.beta_mcs, "beta_mcs")?;
        let params = CostModelParams::new(
            alpha,
            beta,
            doc.t_const_us.unwrap_or(DEFAULT_T_CONST_US),
            doc.cpu_slope.unwrap_or(DEFAULT_CPU_SLOPE),
            doc.cpu_intercept.unwrap_or(DEFAULT_CPU_INTERCEPT),
        )?;
        let threshold = doc.drop_threshold_db.unwrap_or(DEFAULT_DROP_THRESHOLD_DB);
        let table = match &doc.link_table {
            Some(rows) => LinkQualityTable::new(rows, threshold)?,
            None => {
                let measured = LinkQualityTable::measured();
                LinkQualityTable::new(&measured.rows(), threshold)?
            }
        };
        Ok(params.with_link_table(table))
    }
}

impl From<CostModelParams> for ParamsDocument {
    fn from(p: CostModelParams) -> Self {
        ParamsDocument {
            alpha_prb: p.alpha_prb.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            beta_mcs: p.beta_mcs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            t_const_us: Some(p.t_const),
            cpu_slope: Some(p.cpu_slope),
            cpu_intercept: Some(p.cpu_intercept),
            link_table: Some(p.link_table.rows()),
            drop_threshold_db: Some(p.link_table.drop_threshold_db),
            fit_meta: None,
        }
    }
}
