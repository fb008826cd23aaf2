//! Capacity planning for virtualized LTE baseband-unit pools.
//!
//! * [`lte`]: downlink resource arithmetic (symbol rates, MCS bands, UE power).
//! * [`cost`]: empirical subframe-time and CPU-utilization models, link table.
//! * [`fit`]: least-squares calibration of the cost models from traces.
//! * [`sim`]: deterministic discrete-event simulation of RRHs feeding BBU VMs,
//!   plus per-RRH and consolidated provisioning.

pub mod cost;
pub mod fit;
pub mod lte;
pub mod sim;

pub use cost::{
    cpu_percent, link_throughput, load_params, subframe_time, CostError, CostModelParams, CpuFrequency, CpuLoad,
    FrequencyClass, LinkQualityTable, LinkRow, LinkThroughput, ParamsDocument,
};
pub use fit::{
    fit_cpu_line, fit_timing, ingest_csv, ConstTerm, FitError, FitFlag, FitReport, Records, TimingRecord,
    UtilizationRecord,
};
pub use lte::{max_dl_rate, max_ue_power, modulation_of, symbol_rate, LteError, McsIndex, Modulation, PowerDbm,
    PrbAllocation};
pub use sim::{
    min_frequency_for_deadline, provision_consolidated, provision_per_rrh, run, run_traced, BbuVmSpec, JobTrace,
    Provisioning, RrhSpec, Scenario, SimError, SimMetrics, Topology,
};
