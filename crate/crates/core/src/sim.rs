//! Discrete-event simulation of a BBU pool.
//!
//! Every RRH emits at most one downlink subframe per 1 ms TTI. Each VM is a
//! work-conserving, non-preemptive FIFO queue with one server per core and
//! deterministic service times from the subframe timing model. All event
//! times are integer nanoseconds.
//!
//! Jobs arriving in the observed window `[0, duration_ttis ms)` are simulated
//! to completion. A job is *processed* when it completes inside the window;
//! busy time only counts processed jobs. A job *misses* its deadline when it
//! completes after `enqueue + deadline`, whether or not that falls inside the
//! window.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cost::{self, CostError, CostModelParams, CpuFrequency, FrequencyClass, LinkThroughput, MIN_FREQUENCY_GHZ};
use crate::lte::{self, McsIndex, PrbAllocation};

/// Length of one TTI.
pub const TTI_NS: u64 = 1_000_000;
pub const DEFAULT_DEADLINE_US: f64 = 2000.0;
/// Core count of the VM the CPU model was measured on.
pub const REFERENCE_CORES: u32 = 4;
pub const SCHEMA_VERSION: u32 = 1;

/// Stream id for service-time jitter draws, kept apart from activity draws.
const JITTER_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("VM {vm}: CPU frequency {ghz} GHz is below the 2.5 GHz minimum")]
    FrequencyBelowMinimum { vm: String, ghz: f64 },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("RRH {rrh} predicts {load:.4} % which exceeds the per-VM capacity of {capacity:.4} %")]
    InfeasibleItem { rrh: String, load: f64, capacity: f64 },
    #[error("CPU threshold {0} % is outside (0, 100]")]
    InvalidThreshold(f64),
    #[error("budget {budget_us} us does not exceed beta + constant = {floor_us} us")]
    InfeasibleBudget { budget_us: f64, floor_us: f64 },
}

fn default_activity() -> f64 {
    1.0
}

fn default_deadline() -> f64 {
    DEFAULT_DEADLINE_US
}

/// A remote radio head and its downlink configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RrhSpec {
    pub id: String,
    pub prb: PrbAllocation,
    pub mcs: McsIndex,
    /// Probability that a TTI carries a subframe.
    #[serde(default = "default_activity")]
    pub activity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_db: Option<f64>,
}

impl RrhSpec {
    pub fn new(id: impl Into<String>, prb: PrbAllocation, mcs: McsIndex) -> Self {
        RrhSpec { id: id.into(), prb, mcs, activity: 1.0, attenuation_db: None }
    }

    pub fn with_activity(mut self, activity: f64) -> Self {
        self.activity = activity;
        self
    }

    /// Mean downlink rate, `max_dl_rate * activity`.
    pub fn offered_rate_mbps(&self) -> f64 {
        lte::max_dl_rate(self.prb, self.mcs) * self.activity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbuVmSpec {
    pub id: String,
    pub cores: u32,
    pub f_ghz: CpuFrequency,
}

impl BbuVmSpec {
    pub fn new(id: impl Into<String>, cores: u32, f_ghz: CpuFrequency) -> Self {
        BbuVmSpec { id: id.into(), cores, f_ghz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// One BBU VM per RRH.
    PerRrh,
    /// RRHs share VMs of a pool.
    Consolidated,
}

/// VM fleet and RRH-to-VM mapping produced by a provisioning strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Provisioning {
    pub topology: Topology,
    pub vms: Vec<BbuVmSpec>,
    pub assignment: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub topology: Topology,
    pub rrhs: Vec<RrhSpec>,
    pub vms: Vec<BbuVmSpec>,
    /// RRH id to VM id.
    pub assignment: BTreeMap<String, String>,
    #[serde(default = "default_deadline")]
    pub deadline_us: f64,
    pub duration_ttis: u64,
    #[serde(default)]
    pub seed: u64,
    pub params: CostModelParams,
    /// Relative standard deviation of a multiplicative service-time factor.
    /// Off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_jitter: Option<f64>,
    /// Miss-rate above which the run is reported as alarming.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm_miss_rate: Option<f64>,
}

impl Scenario {
    pub fn new(
        rrhs: Vec<RrhSpec>,
        provisioning: Provisioning,
        params: CostModelParams,
        duration_ttis: u64,
        seed: u64,
    ) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            topology: provisioning.topology,
            rrhs,
            vms: provisioning.vms,
            assignment: provisioning.assignment,
            deadline_us: DEFAULT_DEADLINE_US,
            duration_ttis,
            seed,
            params,
            service_jitter: None,
            alarm_miss_rate: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.vms.is_empty() {
            return invalid("scenario has no VMs".into());
        }
        if self.duration_ttis == 0 {
            return invalid("duration_ttis must be positive".into());
        }
        if !(self.deadline_us.is_finite() && self.deadline_us > 0.0) {
            return invalid(format!("deadline_us must be positive, got {}", self.deadline_us));
        }
        if let Some(j) = self.service_jitter {
            if !(j.is_finite() && j >= 0.0) {
                return invalid(format!("service_jitter must be non-negative, got {j}"));
            }
        }
        if let Some(a) = self.alarm_miss_rate {
            if !(a.is_finite() && (0.0..=1.0).contains(&a)) {
                return invalid(format!("alarm_miss_rate must be within [0, 1], got {a}"));
            }
        }
        let mut rrh_ids = BTreeSet::new();
        for r in &self.rrhs {
            if !rrh_ids.insert(r.id.as_str()) {
                return invalid(format!("duplicate RRH id {:?}", r.id));
            }
            if !(r.activity.is_finite() && (0.0..=1.0).contains(&r.activity)) {
                return invalid(format!("RRH {}: activity {} outside [0, 1]", r.id, r.activity));
            }
            if let Some(a) = r.attenuation_db {
                if !a.is_finite() {
                    return invalid(format!("RRH {}: attenuation must be finite", r.id));
                }
                if let Err(e) = self.params.link_table().link_throughput(a, r.prb) {
                    return invalid(format!("RRH {}: {e}", r.id));
                }
            }
        }
        let mut vm_ids = BTreeSet::new();
        for vm in &self.vms {
            if !vm_ids.insert(vm.id.as_str()) {
                return invalid(format!("duplicate VM id {:?}", vm.id));
            }
            if vm.cores == 0 {
                return invalid(format!("VM {} has no cores", vm.id));
            }
            if vm.f_ghz.class() == FrequencyClass::Invalid {
                return Err(SimError::FrequencyBelowMinimum { vm: vm.id.clone(), ghz: vm.f_ghz.value() });
            }
        }
        for (rrh, vm) in &self.assignment {
            if !rrh_ids.contains(rrh.as_str()) {
                return invalid(format!("assignment names unknown RRH {rrh:?}"));
            }
            if !vm_ids.contains(vm.as_str()) {
                return invalid(format!("assignment maps {rrh:?} to unknown VM {vm:?}"));
            }
        }
        if let Some(r) = self.rrhs.iter().find(|r| !self.assignment.contains_key(&r.id)) {
            return invalid(format!("RRH {:?} is not assigned to a VM", r.id));
        }
        if self.topology == Topology::PerRrh {
            let used: BTreeSet<&String> = self.assignment.values().collect();
            if self.rrhs.len() != self.vms.len() || used.len() != self.rrhs.len() {
                return invalid(format!(
                    "per_rrh topology needs a one-to-one RRH/VM mapping ({} RRHs, {} VMs, {} VMs used)",
                    self.rrhs.len(),
                    self.vms.len(),
                    used.len()
                ));
            }
        }
        Ok(())
    }
}

/// Per-job record of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JobTrace {
    pub rrh: usize,
    pub vm: usize,
    pub tti: u64,
    pub enqueue_ns: u64,
    pub start_ns: u64,
    pub completion_ns: u64,
    pub service_ns: u64,
    pub missed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmMetrics {
    pub id: String,
    pub cores: u32,
    pub f_ghz: f64,
    pub freq_class: FrequencyClass,
    pub hosted_rrhs: usize,
    pub offered_subframes: u64,
    pub subframes_processed: u64,
    pub deadline_misses: u64,
    /// Jobs offered in the window that had not completed at its end.
    pub backlog_at_end: u64,
    pub busy_ns: u64,
    pub busy_us: f64,
    /// `busy / (cores * window)`.
    pub accounted_util: f64,
    pub max_response_us: f64,
    /// Predicted CPU % of this VM, scaled from the 4-core reference VM.
    pub predicted_cpu_pct: f64,
    pub overload: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrhMetrics {
    pub id: String,
    pub vm: String,
    pub offered_subframes: u64,
    pub processed: u64,
    pub missed: u64,
    pub service_us: f64,
    pub offered_rate_mbps: f64,
    pub link: Option<LinkThroughput>,
    pub reported_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub seed: u64,
    pub scenario_hash: String,
    pub topology: Topology,
    pub duration_ttis: u64,
    pub deadline_us: f64,
    pub vms: Vec<VmMetrics>,
    pub rrhs: Vec<RrhMetrics>,
    pub warnings: Vec<String>,
    /// Modeling assumptions the result depends on.
    pub assumptions: Vec<String>,
}

pub const METRICS_CSV_HEADER: [&str; 19] = [
    "scope",
    "id",
    "host_vm",
    "cores",
    "f_ghz",
    "freq_class",
    "offered_subframes",
    "subframes_processed",
    "deadline_misses",
    "backlog_at_end",
    "busy_us",
    "accounted_util",
    "predicted_cpu_pct",
    "overload",
    "offered_rate_mbps",
    "reported_mbps",
    "link_status",
    "seed",
    "scenario_hash",
];

impl SimMetrics {
    pub fn total_offered(&self) -> u64 {
        self.rrhs.iter().map(|r| r.offered_subframes).sum()
    }

    pub fn total_misses(&self) -> u64 {
        self.rrhs.iter().map(|r| r.missed).sum()
    }

    pub fn total_busy_ns(&self) -> u64 {
        self.vms.iter().map(|v| v.busy_ns).sum()
    }

    pub fn miss_rate(&self) -> f64 {
        match self.total_offered() {
            0 => 0.0,
            n => self.total_misses() as f64 / n as f64,
        }
    }

    /// Reasons this run should be flagged: overloaded VMs, or a miss rate
    /// above `miss_rate_threshold`.
    pub fn alarms(&self, miss_rate_threshold: Option<f64>) -> Vec<String> {
        let mut out: Vec<String> = self
            .vms
            .iter()
            .filter(|v| v.overload)
            .map(|v| format!("VM {} predicted at {:.4} % CPU (OVERLOAD)", v.id, v.predicted_cpu_pct))
            .collect();
        if let Some(limit) = miss_rate_threshold {
            let rate = self.miss_rate();
            if rate > limit {
                out.push(format!("deadline miss rate {rate} exceeds alarm threshold {limit}"));
            }
        }
        out
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// One row per VM followed by one row per RRH; cells that do not apply
    /// to a row's scope are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(METRICS_CSV_HEADER)?;
        let seed = self.seed.to_string();
        for v in &self.vms {
            w.write_record([
                "vm",
                &v.id,
                "",
                &v.cores.to_string(),
                &v.f_ghz.to_string(),
                &v.freq_class.to_string(),
                &v.offered_subframes.to_string(),
                &v.subframes_processed.to_string(),
                &v.deadline_misses.to_string(),
                &v.backlog_at_end.to_string(),
                &v.busy_us.to_string(),
                &v.accounted_util.to_string(),
                &v.predicted_cpu_pct.to_string(),
                if v.overload { "true" } else { "false" },
                "",
                "",
                "",
                &seed,
                &self.scenario_hash,
            ])?;
        }
        for r in &self.rrhs {
            let link = match r.link {
                None => "",
                Some(LinkThroughput::Rate(_)) => "CONNECTED",
                Some(LinkThroughput::Dropped) => "DROPPED",
            };
            w.write_record([
                "rrh",
                &r.id,
                &r.vm,
                "",
                "",
                "",
                &r.offered_subframes.to_string(),
                &r.processed.to_string(),
                &r.missed.to_string(),
                &(r.offered_subframes - r.processed).to_string(),
                "",
                "",
                "",
                "",
                &r.offered_rate_mbps.to_string(),
                &r.reported_mbps.to_string(),
                link,
                &seed,
                &self.scenario_hash,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Subframe service time in integer nanoseconds.
pub fn service_time_ns(
    params: &CostModelParams,
    f: CpuFrequency,
    prb: PrbAllocation,
    mcs: McsIndex,
) -> Result<u64, CostError> {
    let us = cost::subframe_time(params, f, prb, mcs)?;
    Ok((us * 1000.0).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    // Departures sort first so servers freed at a TTI boundary are
    // visible to the arrivals of that TTI.
    Departure { vm: usize, job: usize },
    Tti(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Event {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn rank(&self) -> u8 {
        match self.kind {
            EventKind::Departure { .. } => 0,
            EventKind::Tti(_) => 1,
        }
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.rank(), self.seq).cmp(&(other.time, other.rank(), other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Server {
    idle: u32,
    queue: VecDeque<usize>,
}

struct Engine {
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,
    jobs: Vec<JobTrace>,
    servers: Vec<Server>,
}

impl Engine {
    fn schedule(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(Event { time, seq: self.seq, kind }));
    }

    fn start(&mut self, job: usize, now: u64) {
        let vm = self.jobs[job].vm;
        self.servers[vm].idle -= 1;
        let j = &mut self.jobs[job];
        j.start_ns = now;
        j.completion_ns = now + j.service_ns;
        let done = j.completion_ns;
        self.schedule(done, EventKind::Departure { vm, job });
    }

    fn dispatch(&mut self, vm: usize, now: u64) {
        while self.servers[vm].idle > 0 {
            match self.servers[vm].queue.pop_front() {
                Some(job) => self.start(job, now),
                None => break,
            }
        }
    }
}

/// Runs the scenario and returns its metrics.
pub fn run(scenario: &Scenario) -> Result<SimMetrics, SimError> {
    run_traced(scenario).map(|(m, _)| m)
}

/// Runs the scenario and also returns every job in creation order.
pub fn run_traced(scenario: &Scenario) -> Result<(SimMetrics, Vec<JobTrace>), SimError> {
    scenario.validate()?;
    let params = &scenario.params;
    let vm_index: BTreeMap<&str, usize> = scenario.vms.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
    let host: Vec<usize> = scenario
        .rrhs
        .iter()
        .map(|r| vm_index[scenario.assignment[&r.id].as_str()])
        .collect();
    let base_service: Vec<u64> = scenario
        .rrhs
        .iter()
        .zip(&host)
        .map(|(r, &vm)| service_time_ns(params, scenario.vms[vm].f_ghz, r.prb, r.mcs))
        .collect::<Result<_, _>>()?;

    let mut activity_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut jitter = scenario.service_jitter.filter(|&s| s > 0.0).map(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(JITTER_STREAM);
        (rng, Normal::new(1.0, s).expect("validated jitter"))
    });

    let deadline_ns = (scenario.deadline_us * 1000.0).round() as u64;
    let mut engine = Engine {
        events: BinaryHeap::new(),
        seq: 0,
        jobs: Vec::new(),
        servers: scenario
            .vms
            .iter()
            .map(|v| Server { idle: v.cores, queue: VecDeque::new() })
            .collect(),
    };
    engine.schedule(0, EventKind::Tti(0));

    while let Some(Reverse(event)) = engine.events.pop() {
        let now = event.time;
        match event.kind {
            EventKind::Tti(k) => {
                let mut touched = BTreeSet::new();
                for (i, rrh) in scenario.rrhs.iter().enumerate() {
                    // One draw per RRH per TTI regardless of activity keeps
                    // the stream aligned across topologies.
                    let u: f64 = activity_rng.random();
                    if u >= rrh.activity {
                        continue;
                    }
                    let mut service = base_service[i];
                    if let Some((rng, normal)) = jitter.as_mut() {
                        let factor: f64 = normal.sample(rng).max(0.0);
                        service = (service as f64 * factor).round() as u64;
                    }
                    let job = engine.jobs.len();
                    engine.jobs.push(JobTrace {
                        rrh: i,
                        vm: host[i],
                        tti: k,
                        enqueue_ns: now,
                        start_ns: 0,
                        completion_ns: 0,
                        service_ns: service,
                        missed: false,
                    });
                    engine.servers[host[i]].queue.push_back(job);
                    touched.insert(host[i]);
                }
                for vm in touched {
                    engine.dispatch(vm, now);
                }
                if k + 1 < scenario.duration_ttis {
                    engine.schedule(now + TTI_NS, EventKind::Tti(k + 1));
                }
            }
            EventKind::Departure { vm, .. } => {
                engine.servers[vm].idle += 1;
                engine.dispatch(vm, now);
            }
        }
    }

    for j in engine.jobs.iter_mut() {
        j.missed = j.completion_ns > j.enqueue_ns + deadline_ns;
    }
    let metrics = collect_metrics(scenario, &host, &base_service, &engine.jobs)?;
    Ok((metrics, engine.jobs))
}

fn collect_metrics(
    scenario: &Scenario,
    host: &[usize],
    base_service: &[u64],
    jobs: &[JobTrace],
) -> Result<SimMetrics, SimError> {
    let params = &scenario.params;
    let window_ns = scenario.duration_ttis * TTI_NS;

    let mut vms: Vec<VmMetrics> = scenario
        .vms
        .iter()
        .map(|v| VmMetrics {
            id: v.id.clone(),
            cores: v.cores,
            f_ghz: v.f_ghz.value(),
            freq_class: v.f_ghz.class(),
            hosted_rrhs: 0,
            offered_subframes: 0,
            subframes_processed: 0,
            deadline_misses: 0,
            backlog_at_end: 0,
            busy_ns: 0,
            busy_us: 0.0,
            accounted_util: 0.0,
            max_response_us: 0.0,
            predicted_cpu_pct: 0.0,
            overload: false,
        })
        .collect();
    let mut rrhs = Vec::with_capacity(scenario.rrhs.len());
    let mut raw_load = vec![0.0f64; vms.len()];

    for (i, r) in scenario.rrhs.iter().enumerate() {
        let offered_rate = r.offered_rate_mbps();
        raw_load[host[i]] += cost::cpu_percent(params, offered_rate)?.percent;
        vms[host[i]].hosted_rrhs += 1;
        let link = r
            .attenuation_db
            .map(|a| params.link_table().link_throughput(a, r.prb))
            .transpose()?;
        let reported = match link {
            None => offered_rate,
            Some(LinkThroughput::Rate(cap)) => offered_rate.min(cap),
            Some(LinkThroughput::Dropped) => 0.0,
        };
        rrhs.push(RrhMetrics {
            id: r.id.clone(),
            vm: scenario.vms[host[i]].id.clone(),
            offered_subframes: 0,
            processed: 0,
            missed: 0,
            service_us: base_service[i] as f64 / 1000.0,
            offered_rate_mbps: offered_rate,
            link,
            reported_mbps: reported,
        });
    }

    let mut max_response = vec![0u64; vms.len()];
    for j in jobs {
        let vm = &mut vms[j.vm];
        let rrh = &mut rrhs[j.rrh];
        vm.offered_subframes += 1;
        rrh.offered_subframes += 1;
        if j.completion_ns <= window_ns {
            vm.subframes_processed += 1;
            vm.busy_ns += j.service_ns;
            rrh.processed += 1;
        } else {
            vm.backlog_at_end += 1;
        }
        if j.missed {
            vm.deadline_misses += 1;
            rrh.missed += 1;
        }
        max_response[j.vm] = max_response[j.vm].max(j.completion_ns - j.enqueue_ns);
    }

    let mut warnings = Vec::new();
    for (i, vm) in vms.iter_mut().enumerate() {
        vm.busy_us = vm.busy_ns as f64 / 1000.0;
        vm.accounted_util = vm.busy_ns as f64 / (vm.cores as u64 * window_ns) as f64;
        vm.max_response_us = max_response[i] as f64 / 1000.0;
        vm.predicted_cpu_pct = raw_load[i] * REFERENCE_CORES as f64 / vm.cores as f64;
        vm.overload = vm.predicted_cpu_pct > 100.0;
        match vm.freq_class {
            FrequencyClass::Marginal => warnings.push(format!(
                "VM {} runs at {} GHz, below the 2.8-3.5 GHz profiled range (MARGINAL)",
                vm.id, vm.f_ghz
            )),
            FrequencyClass::Extrapolated => warnings.push(format!(
                "VM {} runs at {} GHz, above the profiled range; timing is extrapolated",
                vm.id, vm.f_ghz
            )),
            _ => {}
        }
    }
    if scenario.rrhs.iter().any(|r| r.prb.is_extended()) {
        warnings.push("scenario uses extended (non 25/50/100) PRB allocations".into());
    }

    let mut assumptions = vec![format!(
        "CPU predictions scale the {REFERENCE_CORES}-core reference VM linearly with core count"
    )];
    if vms.iter().any(|v| v.hosted_rrhs > 1) {
        assumptions.push("each consolidated eNB instance adds the CPU model intercept as baseline load".into());
    }
    if scenario.service_jitter.is_some_and(|s| s > 0.0) {
        assumptions.push("service times carry multiplicative Gaussian jitter".into());
    }

    Ok(SimMetrics {
        seed: scenario.seed,
        scenario_hash: scenario.hash(),
        topology: scenario.topology,
        duration_ttis: scenario.duration_ttis,
        deadline_us: scenario.deadline_us,
        vms,
        rrhs,
        warnings,
        assumptions,
    })
}

/// One VM per RRH, cloned from `template`.
pub fn provision_per_rrh(rrhs: &[RrhSpec], template: &BbuVmSpec) -> Provisioning {
    let mut vms = Vec::with_capacity(rrhs.len());
    let mut assignment = BTreeMap::new();
    for r in rrhs {
        let id = format!("{}-{}", template.id, r.id);
        assignment.insert(r.id.clone(), id.clone());
        vms.push(BbuVmSpec { id, ..template.clone() });
    }
    Provisioning { topology: Topology::PerRrh, vms, assignment }
}

/// Predicted reference-VM CPU % of one eNB instance serving `rrh`.
pub fn instance_load_pct(params: &CostModelParams, rrh: &RrhSpec) -> Result<f64, CostError> {
    Ok(cost::cpu_percent(params, rrh.offered_rate_mbps())?.percent)
}

/// First-fit-decreasing packing of RRHs into VMs cloned from `template`.
///
/// A VM's load is the sum of its instances' predicted CPU %, each instance
/// carrying the model intercept. Capacity is `cpu_threshold_pct` scaled by
/// `cores / 4`.
pub fn provision_consolidated(
    rrhs: &[RrhSpec],
    template: &BbuVmSpec,
    params: &CostModelParams,
    cpu_threshold_pct: f64,
) -> Result<Provisioning, SimError> {
    if !(cpu_threshold_pct > 0.0 && cpu_threshold_pct <= 100.0) {
        return Err(SimError::InvalidThreshold(cpu_threshold_pct));
    }
    let capacity = cpu_threshold_pct * template.cores as f64 / REFERENCE_CORES as f64;
    let loads: Vec<f64> = rrhs
        .iter()
        .map(|r| instance_load_pct(params, r))
        .collect::<Result<_, _>>()?;
    if let Some((r, &load)) = rrhs.iter().zip(&loads).find(|(_, &l)| l > capacity) {
        return Err(SimError::InfeasibleItem { rrh: r.id.clone(), load, capacity });
    }

    let mut order: Vec<usize> = (0..rrhs.len()).collect();
    order.sort_by(|&a, &b| loads[b].total_cmp(&loads[a]));

    let mut bins: Vec<f64> = Vec::new();
    let mut assignment = BTreeMap::new();
    for i in order {
        // small slack so loads summing to exactly the capacity still fit
        let slot = bins.iter().position(|&used| used + loads[i] <= capacity + 1e-9);
        let bin = match slot {
            Some(b) => b,
            None => {
                bins.push(0.0);
                bins.len() - 1
            }
        };
        bins[bin] += loads[i];
        assignment.insert(rrhs[i].id.clone(), format!("{}-{bin}", template.id));
    }
    let vms = (0..bins.len())
        .map(|b| BbuVmSpec { id: format!("{}-{b}", template.id), ..template.clone() })
        .collect();
    Ok(Provisioning { topology: Topology::Consolidated, vms, assignment })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPlan {
    pub f: CpuFrequency,
    pub class: FrequencyClass,
    /// True when the unclamped answer was below the 2.5 GHz floor.
    pub clamped: bool,
}

/// Lowest CPU frequency whose subframe time fits in `budget_us`.
pub fn min_frequency_for_deadline(
    params: &CostModelParams,
    prb: PrbAllocation,
    mcs: McsIndex,
    budget_us: f64,
) -> Result<FrequencyPlan, SimError> {
    let alpha = params
        .alpha(prb)
        .ok_or(CostError::UnknownParameter { kind: "alpha_prb", key: prb.count() })?;
    let beta = params
        .beta(mcs)
        .ok_or(CostError::UnknownParameter { kind: "beta_mcs", key: mcs.value() as u16 })?;
    let floor = beta + params.t_const();
    if budget_us.is_nan() || budget_us <= floor {
        return Err(SimError::InfeasibleBudget { budget_us, floor_us: floor });
    }
    let raw = alpha / (budget_us - floor);
    let clamped = raw < MIN_FREQUENCY_GHZ;
    let f = CpuFrequency::ghz(raw.max(MIN_FREQUENCY_GHZ))?;
    Ok(FrequencyPlan { f, class: f.class(), clamped })
}
