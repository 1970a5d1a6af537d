use criterion::{black_box, criterion_group, criterion_main, Criterion};

use safeflow::margin;
use safeflow::mcmf;
use safeflow::rounding::{self, DriverConfig};
use safeflow_bench::routable_instance;

fn bench_relaxation(c: &mut Criterion) {
    let inst = routable_instance(10, 4, 7);
    let (normalized, _) = inst.normalize().unwrap();
    let safety = margin::safety_params(&normalized, 0.0).unwrap();
    c.bench_function("relax 10 nodes / 4 commodities", |b| {
        b.iter(|| mcmf::relax(black_box(&normalized), black_box(&safety)).unwrap())
    });
}

fn bench_rounding_trial(c: &mut Criterion) {
    let inst = routable_instance(10, 4, 7);
    let (normalized, _) = inst.normalize().unwrap();
    let safety = margin::safety_params(&normalized, 0.0).unwrap();
    let flow = mcmf::relax(&normalized, &safety).unwrap();
    let mut trial = 0u32;
    c.bench_function("round_paths 10 nodes / 4 commodities", |b| {
        b.iter(|| {
            trial = trial.wrapping_add(1);
            rounding::round_paths(black_box(&flow), black_box(&normalized), 11, trial).unwrap()
        })
    });
}

fn bench_full_solve(c: &mut Criterion) {
    let inst = routable_instance(9, 3, 3);
    let config = DriverConfig { trials: 20, seed: 5, rho_floor: 0.0 };
    c.bench_function("solve 9 nodes / 3 commodities", |b| {
        b.iter(|| rounding::solve(black_box(&inst), black_box(&config)).unwrap())
    });
}

criterion_group!(benches, bench_relaxation, bench_rounding_trial, bench_full_solve);
criterion_main!(benches);
