use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dsrn_core::jost::ode::transfer_matrix_ode;
use dsrn_core::ode::OdeOptions;
use dsrn_core::par;
use dsrn_core::{BlackHoleParams, Complex64, PotentialModel};

fn model() -> PotentialModel {
    PotentialModel::new(BlackHoleParams::new(1.0, 0.5, 0.05).unwrap(), 0.0).unwrap()
}

fn ode_sweep(c: &mut Criterion) {
    let m = model();
    let opts = OdeOptions::default();
    let mut group = c.benchmark_group("ode_sweep");
    group.sample_size(10);
    for &len in &[8usize, 32] {
        let zs: Vec<Complex64> = (1..=len).map(|n| Complex64::new(n as f64, 0.0)).collect();
        let solve = |z: &Complex64| transfer_matrix_ode(&m, 1.0, *z, &opts).unwrap().matrix.entries[0];
        group.bench_with_input(BenchmarkId::new("parallel", len), &zs, |b, zs| {
            b.iter(|| par::map(zs, solve))
        });
        group.bench_with_input(BenchmarkId::new("sequential", len), &zs, |b, zs| {
            b.iter(|| par::map_sequential(zs, solve))
        });
    }
    group.finish();
}

fn complex_grid(c: &mut Criterion) {
    let m = model();
    let opts = OdeOptions::default();
    let zs: Vec<Complex64> =
        (0..16).map(|k| Complex64::new(1.0 + 0.5 * k as f64, 2.0 - 0.25 * k as f64)).collect();
    let solve = |z: &Complex64| transfer_matrix_ode(&m, 0.5, *z, &opts).unwrap().matrix.entries[0];
    let mut group = c.benchmark_group("complex_grid");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| par::map(&zs, solve)));
    group.bench_function("sequential", |b| b.iter(|| par::map_sequential(&zs, solve)));
    group.finish();
}

criterion_group!(benches, ode_sweep, complex_grid);
criterion_main!(benches);
