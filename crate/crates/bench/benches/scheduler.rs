use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use powerlaw_ghz::analysis::{level_exponents, log_grid, scaling_sweep, SweepOptions};
use powerlaw_ghz::scheduler::{plan, plan_continuous, ScheduleOptions};

fn plans(c: &mut Criterion) {
    let opts = ScheduleOptions::default();
    c.bench_function("plan_integer_power", |b| {
        b.iter(|| plan(black_box(2.5), 1, 2_000_000_000, 2, &opts).unwrap())
    });
    c.bench_function("plan_continuous_polylog_1e100", |b| {
        b.iter(|| plan_continuous(black_box(1.5), 1, 1e100, 2, &opts).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let opts = SweepOptions::default();
    let grid = log_grid(0.5, 30.0, 4);
    let alphas = [1.2, 1.5, 1.8, 2.2, 2.5, 2.8];
    c.bench_function("sweep_six_alphas", |b| b.iter(|| scaling_sweep(black_box(&alphas), 1, &grid, &opts).unwrap()));
    c.bench_function("level_exponents_1e300", |b| b.iter(|| level_exponents(black_box(1.5), 1, 1e300, &opts).unwrap()));
}

criterion_group!(benches, plans, sweeps);
criterion_main!(benches);
