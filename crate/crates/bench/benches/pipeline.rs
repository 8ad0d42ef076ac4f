//! Timings of the pipeline stages: special functions, the rate solve, kernel
//! sections, point solves and a small field grid.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wnt_core::fredholm::{field_grid, FieldOptions, FredholmSolver};
use wnt_core::kernels::KernelFactory;
use wnt_core::rate::{solve_gamma, Problem};
use wnt_core::specfun::{polylog, PolylogOrder};

fn special_functions(c: &mut Criterion) {
    c.bench_function("polylog_3_2", |b| {
        b.iter(|| polylog(PolylogOrder::ThreeHalves, black_box(0.7)).unwrap())
    });
    let problem = Problem::with_level(2.0, 2.0).unwrap();
    c.bench_function("solve_gamma_soliton", |b| {
        b.iter(|| solve_gamma(black_box(&problem)).unwrap())
    });
}

fn fredholm(c: &mut Criterion) {
    let spec = solve_gamma(&Problem::with_level(2.0, 2.0).unwrap()).unwrap();
    let factory = KernelFactory::for_fields(spec, 6.0).unwrap();
    let solver = FredholmSolver::new(spec, 6.0).unwrap();
    let slice = solver.at_time(1.0).unwrap();
    let mut group = c.benchmark_group("fredholm");
    group.sample_size(10);
    group.bench_function("kernel_section", |b| {
        b.iter(|| factory.section(black_box(1.0)).unwrap())
    });
    group.bench_function("point_solve", |b| b.iter(|| slice.solve(black_box(0.5)).unwrap()));
    let ts = [0.4, 0.8, 1.2, 1.6];
    let xs: Vec<f64> = (-5..=5).map(|k| 0.5 * k as f64).collect();
    group.bench_function("field_grid_4x11", |b| {
        b.iter(|| field_grid(&solver, black_box(&ts), &xs, FieldOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, special_functions, fredholm);
criterion_main!(benches);
