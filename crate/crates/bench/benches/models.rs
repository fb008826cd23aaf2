use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cran_bbu::fit::{self, ConstTerm};
use cran_bbu::lte::{self, McsIndex, PrbAllocation};
use cran_bbu::{cost, CostModelParams, CpuFrequency};

fn rate(c: &mut Criterion) {
    let prb = PrbAllocation::strict(100).unwrap();
    c.bench_function("max_dl_rate/all_mcs", |b| {
        b.iter(|| McsIndex::all().map(|m| lte::max_dl_rate(black_box(prb), m)).sum::<f64>())
    });
}

fn predict(c: &mut Criterion) {
    let params = CostModelParams::synthetic_default();
    let f = CpuFrequency::ghz(3.2).unwrap();
    let prb = PrbAllocation::strict(50).unwrap();
    let mcs = McsIndex::new(16).unwrap();
    c.bench_function("subframe_time", |b| {
        b.iter(|| cost::subframe_time(black_box(&params), black_box(f), prb, mcs).unwrap())
    });
}

fn fit_timing(c: &mut Criterion) {
    let params = CostModelParams::synthetic_default();
    let freqs: Vec<_> = [2.8, 3.0, 3.2, 3.5].into_iter().map(|f| CpuFrequency::ghz(f).unwrap()).collect();
    let prbs: Vec<_> = [25, 50, 100].into_iter().map(|p| PrbAllocation::strict(p).unwrap()).collect();
    let mcss: Vec<_> = McsIndex::all().collect();
    let records = fit::generate_timing(&params, &freqs, &prbs, &mcss).unwrap();
    c.bench_function("fit_timing/4f_3prb_28mcs", |b| {
        b.iter(|| fit::fit_timing(black_box(&records), ConstTerm::default()).unwrap())
    });
}

criterion_group!(benches, rate, predict, fit_timing);
criterion_main!(benches);
