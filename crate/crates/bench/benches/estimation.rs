use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spillnet::fevd::{gfevd, impulse_responses, normalize_rows};
use spillnet::varnet::{
    cross_validate_lambda, elastic_net_fit, fit_var, lambda_grid, lambda_max, SolverSettings, VarOptions,
};
use spillnet_bench::{covariance, lag_matrices, regression, var_sample};

fn bench_gfevd(c: &mut Criterion) {
    let mut group = c.benchmark_group("gfevd");
    for n in [10, 50] {
        let phi = lag_matrices(n, 3, 1);
        let sigma = covariance(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let irf = impulse_responses(black_box(&phi), 10).unwrap();
                normalize_rows(&gfevd(&irf, black_box(&sigma)).unwrap()).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_elastic_net(c: &mut Criterion) {
    let (x, y) = regression(100, 60, 3);
    let settings = SolverSettings::default();
    let lmax = lambda_max(x.view(), y.view(), 0.5);
    c.bench_function("elastic_net/single_fit", |b| {
        b.iter(|| elastic_net_fit(x.view(), y.view(), 0.5, black_box(0.05 * lmax), &settings).unwrap())
    });
    let grid = lambda_grid(lmax, 100, 1e-4);
    let mut group = c.benchmark_group("elastic_net");
    group.sample_size(10);
    group.bench_function("cv_10_fold", |b| {
        b.iter(|| cross_validate_lambda(x.view(), y.view(), 0.5, 10, black_box(&grid), &settings).unwrap())
    });
    group.finish();
}

fn bench_fit_var(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_var");
    group.sample_size(10);
    for n in [10, 20] {
        let window = var_sample(n, 100, 4);
        let opts = VarOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| fit_var(black_box(window.view()), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_gfevd, bench_elastic_net, bench_fit_var);
criterion_main!(benches);
