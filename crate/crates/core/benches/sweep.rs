use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rsma_uav::harness::config::SweepSpec;
use rsma_uav::harness::sweep::run_sweep;
use rsma_uav::parallel::Execution;
use rsma_uav::placement::Strategy;

fn spec() -> SweepSpec {
    SweepSpec {
        snr_db: vec![10.0, 20.0],
        strategies: vec![Strategy::DistAvg, Strategy::IterativeSearch],
        realizations: 8,
        grid_l: 5,
        ..SweepSpec::default()
    }
}

fn sweep(c: &mut Criterion) {
    let spec = spec();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_sweep(black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
