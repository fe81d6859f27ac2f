use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use msde_bench::{klein_fixture, sphere_fixture};
use msde_core::estimators::{batch_estimate, drift_estimate};
use msde_core::numerics::sym_eig;
use msde_core::simulate::{simulate, SimConfig};
use msde_core::{EstimatorConfig, ManifoldSpec, Matrix, Vector};

pub fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for n in [3, 4, 8] {
        let a = Matrix::from_fn(n, n, |i, j| {
            1.0 / (1.0 + i as f64 + j as f64) + if i == j { 0.5 } else { 0.0 }
        });
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| sym_eig(black_box(a)).unwrap())
        });
    }
    group.finish();
}

pub fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let steps = 10_000;
    group.throughput(Throughput::Elements(steps as u64));
    let sphere = SimConfig::new(ManifoldSpec::sphere(), steps, 0.01, 1);
    let klein = SimConfig::new(ManifoldSpec::klein_bottle(2.0, 1.0).unwrap(), steps, 0.01, 1);
    group.bench_function("sphere", |b| b.iter(|| simulate(black_box(&sphere)).unwrap()));
    group.bench_function("klein_bottle", |b| b.iter(|| simulate(black_box(&klein)).unwrap()));
    group.finish();
}

pub fn estimation(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate");
    for (name, t, h) in [
        ("sphere", sphere_fixture(100_000), 0.05),
        ("klein_bottle", klein_fixture(100_000), 0.15),
    ] {
        let cfg = EstimatorConfig::new(h, 2);
        let xs: Vec<Vector> = (0..100).map(|k| Vector::from_column_slice(t.point(k * 997))).collect();
        group.bench_function(BenchmarkId::new("brute_force_point", name), |b| {
            b.iter(|| drift_estimate(black_box(&t), xs[0].as_slice(), &cfg).unwrap())
        });
        group.throughput(Throughput::Elements(xs.len() as u64));
        group.bench_function(BenchmarkId::new("indexed_batch_100", name), |b| {
            b.iter(|| batch_estimate(black_box(&t), &xs, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigen, simulation, estimation);
criterion_main!(benches);
