//! Brute-force reference simulator used to check `sim::run`.
//!
//! It shares nothing with the engine except the public scenario types and
//! the documented activity-draw order (one `ChaCha8Rng` draw per RRH per
//! TTI, TTI-major, RRH order as listed). Events live in an unsorted vector
//! and the earliest one is found by linear scan.

#![allow(dead_code)]

use std::collections::BTreeMap;

use cran_bbu::sim::{Scenario, TTI_NS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleJob {
    pub rrh: usize,
    pub vm: usize,
    pub tti: u64,
    pub enqueue_ns: u64,
    pub service_ns: u64,
    pub start_ns: u64,
    pub completion_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVm {
    pub busy_ns: u64,
    pub processed: u64,
    pub misses: u64,
}

/// Service time straight from the model tables, in ns.
pub fn oracle_service_ns(scenario: &Scenario, rrh: usize, vm: usize) -> u64 {
    let r = &scenario.rrhs[rrh];
    let p = &scenario.params;
    let alpha = p.alpha_table()[&r.prb.count()];
    let beta = p.beta_table()[&r.mcs.value()];
    let us = alpha / scenario.vms[vm].f_ghz.value() + beta + p.t_const();
    (us * 1000.0).round() as u64
}

pub fn oracle_jobs(scenario: &Scenario) -> Vec<OracleJob> {
    assert!(scenario.service_jitter.is_none(), "oracle has no jitter model");
    let vm_of: Vec<usize> = scenario
        .rrhs
        .iter()
        .map(|r| {
            let id = &scenario.assignment[&r.id];
            scenario.vms.iter().position(|v| &v.id == id).unwrap()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut jobs = Vec::new();
    for tti in 0..scenario.duration_ttis {
        for (i, r) in scenario.rrhs.iter().enumerate() {
            let u: f64 = rng.random();
            if u < r.activity {
                jobs.push(OracleJob {
                    rrh: i,
                    vm: vm_of[i],
                    tti,
                    enqueue_ns: tti * TTI_NS,
                    service_ns: oracle_service_ns(scenario, i, vm_of[i]),
                    start_ns: u64::MAX,
                    completion_ns: u64::MAX,
                });
            }
        }
    }

    for vm in 0..scenario.vms.len() {
        let cores = scenario.vms[vm].cores as usize;
        // (time, rank, job): departures rank 0, arrivals rank 1
        let mut events: Vec<(u64, u8, usize)> = jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.vm == vm)
            .map(|(k, j)| (j.enqueue_ns, 1, k))
            .collect();
        let mut busy: Vec<Option<usize>> = vec![None; cores];
        let mut waiting: Vec<usize> = Vec::new();
        while !events.is_empty() {
            let mut best = 0;
            for i in 1..events.len() {
                if events[i] < events[best] {
                    best = i;
                }
            }
            let (now, rank, k) = events.remove(best);
            if rank == 0 {
                let slot = busy.iter().position(|s| *s == Some(k)).unwrap();
                busy[slot] = None;
            } else {
                waiting.push(k);
            }
            while let Some(slot) = busy.iter().position(Option::is_none) {
                if waiting.is_empty() {
                    break;
                }
                let next = waiting.remove(0);
                busy[slot] = Some(next);
                jobs[next].start_ns = now;
                jobs[next].completion_ns = now + jobs[next].service_ns;
                events.push((jobs[next].completion_ns, 0, next));
            }
        }
    }
    jobs
}

pub fn oracle_vm_totals(scenario: &Scenario, jobs: &[OracleJob]) -> Vec<OracleVm> {
    let window = scenario.duration_ttis * TTI_NS;
    let deadline = (scenario.deadline_us * 1000.0).round() as u64;
    let mut out = vec![OracleVm { busy_ns: 0, processed: 0, misses: 0 }; scenario.vms.len()];
    for j in jobs {
        let v = &mut out[j.vm];
        if j.completion_ns <= window {
            v.busy_ns += j.service_ns;
            v.processed += 1;
        }
        if j.completion_ns > j.enqueue_ns + deadline {
            v.misses += 1;
        }
    }
    out
}

/// Misses counted per RRH index.
pub fn oracle_rrh_misses(scenario: &Scenario, jobs: &[OracleJob]) -> BTreeMap<usize, u64> {
    let deadline = (scenario.deadline_us * 1000.0).round() as u64;
    let mut out = BTreeMap::new();
    for j in jobs {
        let e = out.entry(j.rrh).or_insert(0);
        if j.completion_ns > j.enqueue_ns + deadline {
            *e += 1;
        }
    }
    out
}

pub mod gen {
    use std::collections::BTreeMap;

    use cran_bbu::lte::{McsIndex, PrbAllocation};
    use cran_bbu::sim::{BbuVmSpec, Provisioning, RrhSpec, Scenario, Topology};
    use cran_bbu::{CostModelParams, CpuFrequency};
    use rand::Rng;

    /// A random monotone parameter table covering PRB 25/50/100 and all MCS.
    pub fn params<R: Rng>(rng: &mut R) -> CostModelParams {
        let mut a = rng.random_range(100.0..1500.0);
        let mut alpha = BTreeMap::new();
        for p in [25u16, 50, 100] {
            alpha.insert(p, a);
            a += rng.random_range(0.0..1000.0);
        }
        let mut b = rng.random_range(0.0..60.0);
        let mut beta = BTreeMap::new();
        for m in 0u8..=27 {
            beta.insert(m, b);
            if rng.random_bool(0.7) {
                b += rng.random_range(0.0..8.0);
            }
        }
        let t_const = rng.random_range(0.0..5.0);
        CostModelParams::new(alpha, beta, t_const, 0.6237, 21.3544).unwrap()
    }

    pub fn rrh<R: Rng>(rng: &mut R, id: String) -> RrhSpec {
        let prb = PrbAllocation::strict([25, 50, 100][rng.random_range(0..3)]).unwrap();
        let mcs = McsIndex::new(rng.random_range(0..=27)).unwrap();
        let activity = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.0..1.0) };
        RrhSpec::new(id, prb, mcs).with_activity(activity)
    }

    /// At most 3 RRHs, 2 VMs and 50 TTIs.
    pub fn small_scenario<R: Rng>(rng: &mut R) -> Scenario {
        let n_rrh = rng.random_range(0..=3usize);
        let n_vm = rng.random_range(1..=2usize);
        let rrhs: Vec<RrhSpec> = (0..n_rrh).map(|i| rrh(rng, format!("rrh{i}"))).collect();
        let vms: Vec<BbuVmSpec> = (0..n_vm)
            .map(|i| {
                let f = CpuFrequency::ghz(rng.random_range(2.5..4.0)).unwrap();
                BbuVmSpec::new(format!("vm{i}"), rng.random_range(1..=3), f)
            })
            .collect();
        let per_rrh = n_rrh == n_vm && rng.random_bool(0.5);
        let assignment = rrhs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let vm = if per_rrh { i } else { rng.random_range(0..n_vm) };
                (r.id.clone(), vms[vm].id.clone())
            })
            .collect();
        let topology = if per_rrh { Topology::PerRrh } else { Topology::Consolidated };
        let mut s = Scenario::new(
            rrhs,
            Provisioning { topology, vms, assignment },
            params(rng),
            rng.random_range(1..=50),
            rng.random(),
        );
        s.deadline_us = rng.random_range(300.0..3000.0);
        s
    }
}
