use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cran_bbu::lte::{McsIndex, PrbAllocation};
use cran_bbu::sim::{self, BbuVmSpec, RrhSpec, Scenario};
use cran_bbu::{CostModelParams, CpuFrequency};

fn scenario(n_rrh: usize, ttis: u64) -> Scenario {
    let params = CostModelParams::synthetic_default();
    let rrhs: Vec<_> = (0..n_rrh)
        .map(|i| {
            let prb = PrbAllocation::strict([25, 50, 100][i % 3]).unwrap();
            let mcs = McsIndex::new((i * 7 % 28) as i64).unwrap();
            RrhSpec::new(format!("rrh{i}"), prb, mcs).with_activity(0.8)
        })
        .collect();
    let template = BbuVmSpec::new("bbu", 4, CpuFrequency::ghz(3.2).unwrap());
    let prov = sim::provision_consolidated(&rrhs, &template, &params, 100.0).unwrap();
    Scenario::new(rrhs, prov, params, ttis, 7)
}

fn run(c: &mut Criterion) {
    let mut group = c.benchmark_group("sim_run");
    for n in [1, 8, 32] {
        let s = scenario(n, 1000);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| b.iter(|| sim::run(black_box(s)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, run);
criterion_main!(benches);
