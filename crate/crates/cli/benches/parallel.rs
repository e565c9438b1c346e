//! One worker against the full pool on the heaviest data-parallel kernels.
//! Build with `--no-default-features` to time the sequential fallback.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gk_base::par;
use smooth_conjugacy::{jacobian_deviation, random_test_map, Diffeo, Grid};
use wiener_sim::{covariance_check, sample_paths, RotationSpec};

fn workers() -> Vec<(&'static str, usize)> {
    vec![("1", 1), ("pool", 0)]
}

fn bench_paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_paths_50k");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |b, &w| {
            b.iter(|| par::with_workers(w, || black_box(sample_paths(3, 50_000, 7).unwrap())))
        });
    }
    g.finish();
}

fn bench_covariance(c: &mut Criterion) {
    let ens = sample_paths(3, 50_000, 7).unwrap();
    let spec = RotationSpec::new(
        vec![gk_base::q(0, 1), gk_base::q(1, 2), gk_base::q(1, 1)],
        vec![gk_base::q(1, 3), gk_base::q(2, 7)],
    )
    .unwrap();
    let mut g = c.benchmark_group("covariance_50k");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |b, &w| {
            b.iter(|| par::with_workers(w, || black_box(covariance_check(&ens, &spec, 3).unwrap())))
        });
    }
    g.finish();
}

fn bench_jacobian(c: &mut Criterion) {
    let map: Arc<dyn Diffeo> = random_test_map(3, 1).unwrap();
    let grid = Grid::uniform(3, 24).unwrap();
    let mut g = c.benchmark_group("jacobian_3d_24");
    g.sample_size(10);
    for (name, w) in workers() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &w, |b, &w| {
            b.iter(|| par::with_workers(w, || black_box(jacobian_deviation(map.as_ref(), &grid, 1e-6))))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_paths, bench_covariance, bench_jacobian);
criterion_main!(benches);
