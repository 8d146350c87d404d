use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use baroflow_bench::{pulse, space};
use baroflow_core::linsolve;
use baroflow_core::newton::{ImplicitStep, NewtonConfig};
use baroflow_core::{BarotropicEos, Stepper};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for m in [50, 100] {
        let sp = space(m);
        let s = pulse(&sp);
        let eos = BarotropicEos::default();
        group.bench_with_input(BenchmarkId::new("weighted_mass", m), &m, |b, _| {
            b.iter(|| sp.assemble_weighted_mass(&s.rho).unwrap())
        });
        let system = ImplicitStep::new(&sp, &eos, &s, 0.005).unwrap();
        group.bench_with_input(BenchmarkId::new("residual", m), &m, |b, _| {
            b.iter(|| system.residual(&s).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("jacobian", m), &m, |b, _| {
            b.iter(|| system.jacobian(&s).unwrap())
        });
    }
    group.finish();
}

fn linear_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("linear_solve");
    group.sample_size(10);
    let sp = space(50);
    let s = pulse(&sp);
    let eos = BarotropicEos::default();
    let jac = ImplicitStep::new(&sp, &eos, &s, 0.005).unwrap().jacobian(&s).unwrap();
    let rhs = vec![1.0; jac.nrows()];
    group.bench_function("jacobian_m50", |b| b.iter(|| linsolve::solve(&jac, &rhs).unwrap()));
    let cache = linsolve::SymbolicCache::new();
    group.bench_function("jacobian_m50_cached", |b| {
        b.iter(|| linsolve::solve_cached(&jac, &rhs, &cache).unwrap())
    });
    group.finish();
}

fn time_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("time_step");
    group.sample_size(10);
    let sp = space(50);
    let s = pulse(&sp);
    let stepper = Stepper::new(&sp, BarotropicEos::default());
    group.bench_function("fully_implicit_m50", |b| {
        b.iter(|| stepper.fully_implicit(&s, 0.005, &NewtonConfig::default()).unwrap())
    });
    for k in [1, 2, 5] {
        group.bench_with_input(BenchmarkId::new("decoupled_m50", k), &k, |b, &k| {
            b.iter(|| stepper.decoupled(&s, 0.005, k).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, linear_solve, time_step);
criterion_main!(benches);
