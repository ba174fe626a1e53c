//! Solver throughput with and without the rayon pool.
//!
//! Build with `--no-default-features` to confirm the sequential fallback:
//! both modes then take the same path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dbar_core::geometry::{DomainSpec, Shape};
use dbar_core::par;
use dbar_core::profiles::TypeProfile;
use dbar_core::solver::{interior_points, solve, OneForm, SolverOptions};
use dbar_core::ExecMode;

fn batch(c: &mut Criterion) {
    let spec = DomainSpec::new(Shape::Modulus, TypeProfile::exp(0.5, 1.0).unwrap());
    let form = OneForm::z2_dzbar1();
    let pts = interior_points(&spec, 16, 0.05, 1);
    let mut g = c.benchmark_group("solve_batch");
    g.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        let inner = SolverOptions {
            exec: ExecMode::Sequential,
            ..SolverOptions::with_tol(1e-5)
        };
        g.bench_with_input(BenchmarkId::new("points", format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| par::map(mode, &pts, |z| solve(&spec, &form, z, &inner).unwrap().value))
        });
    }
    g.finish();
}

fn single(c: &mut Criterion) {
    let spec = DomainSpec::new(Shape::Modulus, TypeProfile::power(1.0).unwrap());
    let form = OneForm::dzbar2();
    let z = interior_points(&spec, 1, 0.1, 2)[0];
    let mut g = c.benchmark_group("solve_cubature");
    g.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        let opts = SolverOptions {
            exec: mode,
            ..SolverOptions::with_tol(1e-7)
        };
        g.bench_with_input(BenchmarkId::new("panels", format!("{mode:?}")), &opts, |b, opts| {
            b.iter(|| solve(&spec, &form, &z, opts).unwrap().value)
        });
    }
    g.finish();
}

criterion_group!(benches, batch, single);
criterion_main!(benches);
