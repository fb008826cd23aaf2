//! LTE downlink resource arithmetic.
//!
//! Rates here are the idealized PHY figure used by the CPU model: resource
//! elements per second times bits per modulation symbol. No transport block
//! size tables, no control-channel overhead.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Subcarriers in one physical resource block.
pub const SUBCARRIERS_PER_PRB: u32 = 12;
/// OFDM symbols per slot with the normal cyclic prefix.
pub const SYMBOLS_PER_SLOT_NORMAL_CP: u32 = 7;
/// Slots per 1 ms subframe.
pub const SLOTS_PER_SUBFRAME: u32 = 2;
/// Resource elements carried by one PRB in one millisecond (12 x 7 x 2).
pub const SYMBOLS_PER_PRB_PER_MS: u32 =
    SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT_NORMAL_CP * SLOTS_PER_SUBFRAME;

/// Highest supported MCS index.
pub const MAX_MCS: u8 = 27;
/// PRB counts of the 5, 10 and 20 MHz channel bandwidths.
pub const STRICT_PRBS: [u16; 3] = [25, 50, 100];
/// Largest PRB count accepted in extended mode.
pub const MAX_PRB: u16 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LteError {
    #[error("MCS index {0} outside 0..={MAX_MCS}")]
    McsOutOfRange(i64),
    #[error("PRB count {0} is not one of 25, 50, 100")]
    PrbNotStrict(i64),
    #[error("PRB count {0} outside 0..={MAX_PRB}")]
    PrbOutOfRange(i64),
    #[error("power {0} dBm is not finite")]
    NonFinitePower(f64),
    #[error("extended cyclic prefix is not supported")]
    ExtendedCyclicPrefix,
}

/// Downlink MCS index, 0 through 27.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct McsIndex(u8);

impl McsIndex {
    pub fn new(value: i64) -> Result<Self, LteError> {
        if (0..=MAX_MCS as i64).contains(&value) {
            Ok(McsIndex(value as u8))
        } else {
            Err(LteError::McsOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// All 28 indices in ascending order.
    pub fn all() -> impl Iterator<Item = McsIndex> {
        (0..=MAX_MCS).map(McsIndex)
    }
}

impl TryFrom<i64> for McsIndex {
    type Error = LteError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        McsIndex::new(value)
    }
}

impl From<McsIndex> for u8 {
    fn from(m: McsIndex) -> u8 {
        m.0
    }
}

impl fmt::Display for McsIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of allocated physical resource blocks.
///
/// Strict allocations are the three channel bandwidths {25, 50, 100}.
/// Extended allocations accept any count in 0..=100 and carry a flag so
/// callers can tell them apart from measured configurations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u16")]
pub struct PrbAllocation {
    count: u16,
    extended: bool,
}

impl PrbAllocation {
    pub fn strict(count: i64) -> Result<Self, LteError> {
        if STRICT_PRBS.iter().any(|&p| p as i64 == count) {
            Ok(PrbAllocation { count: count as u16, extended: false })
        } else {
            Err(LteError::PrbNotStrict(count))
        }
    }

    pub fn extended(count: i64) -> Result<Self, LteError> {
        if (0..=MAX_PRB as i64).contains(&count) {
            Ok(PrbAllocation { count: count as u16, extended: true })
        } else {
            Err(LteError::PrbOutOfRange(count))
        }
    }

    /// Strict when the count is a standard bandwidth, extended otherwise.
    pub fn lenient(count: i64) -> Result<Self, LteError> {
        Self::strict(count).or_else(|_| Self::extended(count))
    }

    pub fn count(self) -> u16 {
        self.count
    }

    pub fn is_extended(self) -> bool {
        self.extended
    }
}

// Equality and ordering look at the count only; the mode flag is metadata.
impl PartialEq for PrbAllocation {
    fn eq(&self, other: &Self) -> bool {
        self.count == other.count
    }
}

impl Eq for PrbAllocation {}

impl PartialOrd for PrbAllocation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PrbAllocation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.count.cmp(&other.count)
    }
}

impl std::hash::Hash for PrbAllocation {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.count.hash(state);
    }
}

impl TryFrom<i64> for PrbAllocation {
    type Error = LteError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        PrbAllocation::lenient(value)
    }
}

impl From<PrbAllocation> for u16 {
    fn from(p: PrbAllocation) -> u16 {
        p.count
    }
}

impl fmt::Display for PrbAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CyclicPrefix {
    Normal,
    Extended,
}

impl CyclicPrefix {
    pub fn symbols_per_slot(self) -> Result<u32, LteError> {
        match self {
            CyclicPrefix::Normal => Ok(SYMBOLS_PER_SLOT_NORMAL_CP),
            CyclicPrefix::Extended => Err(LteError::ExtendedCyclicPrefix),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "16QAM",
            Modulation::Qam64 => "64QAM",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Transmit power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PowerDbm(f64);

impl PowerDbm {
    pub fn new(value: f64) -> Result<Self, LteError> {
        if value.is_finite() {
            Ok(PowerDbm(value))
        } else {
            Err(LteError::NonFinitePower(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PowerDbm {
    type Error = LteError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        PowerDbm::new(value)
    }
}

impl From<PowerDbm> for f64 {
    fn from(p: PowerDbm) -> f64 {
        p.0
    }
}

/// Downlink modulation band: 0-9 QPSK, 10-16 16-QAM, 17-27 64-QAM.
pub fn modulation_of(mcs: McsIndex) -> Modulation {
    match mcs.value() {
        0..=9 => Modulation::Qpsk,
        10..=16 => Modulation::Qam16,
        _ => Modulation::Qam64,
    }
}

/// Resource-element rate in Msym/s (168 symbols per PRB per ms).
pub fn symbol_rate(prb: PrbAllocation) -> f64 {
    (prb.count() as u32 * SYMBOLS_PER_PRB_PER_MS) as f64 / 1000.0
}

/// Symbol rate for an explicit cyclic prefix; only the normal prefix is modeled.
pub fn symbol_rate_with_cp(prb: PrbAllocation, cp: CyclicPrefix) -> Result<f64, LteError> {
    let per_ms = SUBCARRIERS_PER_PRB * cp.symbols_per_slot()? * SLOTS_PER_SUBFRAME;
    Ok((prb.count() as u32 * per_ms) as f64 / 1000.0)
}

/// Maximum downlink data rate in Mbps: symbol rate times bits per symbol.
pub fn max_dl_rate(prb: PrbAllocation, mcs: McsIndex) -> f64 {
    // Integer product first so that e.g. (100, 27) is exactly 100.8.
    let bits_per_ms = prb.count() as u32 * SYMBOLS_PER_PRB_PER_MS * modulation_of(mcs).bits_per_symbol();
    bits_per_ms as f64 / 1000.0
}

/// UE maximum transmit power over the usable bandwidth:
/// `PDSCH_EPRE + 10 log10(12 N_PRB)`.
pub fn max_ue_power(pdsch_epre: PowerDbm, n_prb: PrbAllocation) -> PowerDbm {
    let res = (SUBCARRIERS_PER_PRB * n_prb.count() as u32) as f64;
    PowerDbm(pdsch_epre.value() + 10.0 * res.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mcs(v: i64) -> McsIndex {
        McsIndex::new(v).unwrap()
    }

    fn prb(v: i64) -> PrbAllocation {
        PrbAllocation::strict(v).unwrap()
    }

    #[test]
    fn modulation_bands() {
        assert_eq!(modulation_of(mcs(5)), Modulation::Qpsk);
        assert_eq!(modulation_of(mcs(5)).bits_per_symbol(), 2);
        assert_eq!(modulation_of(mcs(9)), Modulation::Qpsk);
        assert_eq!(modulation_of(mcs(10)), Modulation::Qam16);
        assert_eq!(modulation_of(mcs(10)).bits_per_symbol(), 4);
        assert_eq!(modulation_of(mcs(16)), Modulation::Qam16);
        assert_eq!(modulation_of(mcs(17)), Modulation::Qam64);
        assert_eq!(modulation_of(mcs(27)).bits_per_symbol(), 6);
    }

    #[test]
    fn symbol_rates() {
        assert_eq!(SYMBOLS_PER_PRB_PER_MS, 168);
        assert_eq!(symbol_rate(prb(100)), 16.8);
        // 50 * 168 = 8400 symbols per ms
        assert_eq!(symbol_rate(prb(50)), 8.4);
        assert_eq!(symbol_rate(PrbAllocation::extended(0).unwrap()), 0.0);
    }

    #[test]
    fn extended_cp_rejected() {
        assert_eq!(symbol_rate_with_cp(prb(100), CyclicPrefix::Normal), Ok(16.8));
        assert_eq!(
            symbol_rate_with_cp(prb(100), CyclicPrefix::Extended),
            Err(LteError::ExtendedCyclicPrefix)
        );
    }

    #[test]
    fn dl_rates() {
        assert_eq!(max_dl_rate(prb(100), mcs(27)), 100.8);
        assert_eq!(max_dl_rate(prb(25), mcs(0)), 8.4);
        assert_eq!(max_dl_rate(prb(100), mcs(0)), 33.6);
        assert_eq!(max_dl_rate(prb(25), mcs(10)), 16.8);
    }

    #[test]
    fn ue_power() {
        let zero = PowerDbm::new(0.0).unwrap();
        // 10 log10(1200) and 10 log10(300), 30-digit reference values
        assert!((max_ue_power(zero, prb(100)).value() - 30.791_812_460_476_248).abs() < 1e-12);
        assert!((max_ue_power(zero, prb(25)).value() - 24.771_212_547_196_624).abs() < 1e-12);
        let minus10 = PowerDbm::new(-10.0).unwrap();
        assert!((max_ue_power(minus10, prb(100)).value() - 20.791_812_460_476_248).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert_eq!(McsIndex::new(28), Err(LteError::McsOutOfRange(28)));
        assert_eq!(McsIndex::new(-1), Err(LteError::McsOutOfRange(-1)));
        assert_eq!(PrbAllocation::strict(30), Err(LteError::PrbNotStrict(30)));
        assert_eq!(PrbAllocation::extended(101), Err(LteError::PrbOutOfRange(101)));
        assert!(PrbAllocation::extended(30).unwrap().is_extended());
        assert!(!PrbAllocation::lenient(50).unwrap().is_extended());
        assert!(PrbAllocation::lenient(0).unwrap().is_extended());
        assert!(PowerDbm::new(f64::NAN).is_err());
    }

    #[test]
    fn serde_forms() {
        let p: PrbAllocation = serde_json::from_str("50").unwrap();
        assert_eq!(p.count(), 50);
        assert!(serde_json::from_str::<McsIndex>("28").is_err());
        assert_eq!(serde_json::to_string(&mcs(7)).unwrap(), "7");
    }

    #[test]
    fn bits_non_decreasing_in_mcs() {
        let bits: Vec<u32> = McsIndex::all().map(|m| modulation_of(m).bits_per_symbol()).collect();
        assert_eq!(bits.len(), 28);
        assert!(bits.windows(2).all(|w| w[0] <= w[1]));
    }

    proptest! {
        #[test]
        fn rate_monotone(p in 0i64..100, m in 0i64..27) {
            let a = PrbAllocation::extended(p).unwrap();
            let b = PrbAllocation::extended(p + 1).unwrap();
            let m0 = mcs(m);
            let m1 = mcs(m + 1);
            prop_assert!(max_dl_rate(a, m0) < max_dl_rate(b, m0));
            prop_assert!(max_dl_rate(a, m0) <= max_dl_rate(a, m1));
        }

        #[test]
        fn rate_linear_in_prb(p in 0i64..=50, m in 0i64..=27) {
            let single = max_dl_rate(PrbAllocation::extended(p).unwrap(), mcs(m));
            let double = max_dl_rate(PrbAllocation::extended(2 * p).unwrap(), mcs(m));
            prop_assert!((double - 2.0 * single).abs() <= 1e-12 * double.max(1.0));
        }

        #[test]
        fn doubling_prbs_adds_three_db(e in -50.0f64..50.0, n in 1i64..=50) {
            let epre = PowerDbm::new(e).unwrap();
            let one = max_ue_power(epre, PrbAllocation::extended(n).unwrap()).value();
            let two = max_ue_power(epre, PrbAllocation::extended(2 * n).unwrap()).value();
            prop_assert!((two - one - 10.0 * 2f64.log10()).abs() < 1e-9);
        }
    }
}
