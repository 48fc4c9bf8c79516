use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lifespan_core::duhamel::{l_apply, GridOperator};
use lifespan_core::fd::{fd_solve, FdConfig};
use lifespan_core::kernels::wave_kernel;
use lifespan_core::linear_wave::u0_field;
use lifespan_core::{DataFamily, FnField, GridSpec};

fn kernels(c: &mut Criterion) {
    c.bench_function("wave_kernel", |b| b.iter(|| wave_kernel(black_box(0.7), black_box(1.3), black_box(2.9))));
    let psi = FnField::new(|l: f64, tau: f64| (-(l * l)).exp() * (1.0 + tau));
    c.bench_function("l_apply pointwise", |b| b.iter(|| l_apply(&psi, black_box(1.2), black_box(2.5), 1e-8).unwrap()));
}

fn grid_operator(c: &mut Criterion) {
    let grid = GridSpec::uniform(0.1, 4.0, 1.0).unwrap();
    let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
    let u0 = u0_field(&data, 0.1, &grid).unwrap();
    let forcing = u0.map(|v| v.abs().powf(1.5));
    let mut group = c.benchmark_group("grid_operator");
    group.sample_size(10);
    group.bench_function("build step 0.1 horizon 4", |b| b.iter(|| GridOperator::new(black_box(grid)).unwrap()));
    let op = GridOperator::new(grid).unwrap();
    group.bench_function("apply step 0.1 horizon 4", |b| b.iter(|| op.apply(black_box(&forcing)).unwrap()));
    group.finish();
}

fn finite_differences(c: &mut Criterion) {
    let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
    let cfg = FdConfig::default();
    let mut group = c.benchmark_group("fd");
    group.sample_size(10);
    group.bench_function("fd_solve dr 0.02 to t = 10", |b| b.iter(|| fd_solve(&data, black_box(0.5), 1.5, &cfg, 10.0).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels, grid_operator, finite_differences);
criterion_main!(benches);
