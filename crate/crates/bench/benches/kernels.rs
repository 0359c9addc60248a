//! Microbenchmarks of the numerical kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sojourn_core::covariance::{CovarianceModel, SpaceTimeCov, SpatialCovariance};
use sojourn_core::geometry::{distance_density, ConvexBody, DistanceDensity};
use sojourn_core::specfun::{gauss_hermite_weighted, mittag_leffler_neg};
use sojourn_core::variance::{sigma2_nk, QuadSpec};
use std::hint::black_box;

fn bench_mittag_leffler(c: &mut Criterion) {
    let mut g = c.benchmark_group("mittag_leffler");
    for &(nu, x) in &[(0.5f64, 0.5f64), (0.5, 3.0), (0.3, 50.0), (0.8, 3.0)] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("nu{nu}_x{x}")),
            &(nu, x),
            |b, &(nu, x)| b.iter(|| mittag_leffler_neg(black_box(nu), black_box(x)).unwrap()),
        );
    }
    g.finish();
}

fn bench_covariance_eval(c: &mut Criterion) {
    let sep = CovarianceModel::separable(
        SpatialCovariance::PoweredExponential { lambda: 1.0, kappa: 1.0 },
        0.4,
    )
    .unwrap();
    let gml = CovarianceModel::gneiting_ml(1.0, 0.6, 0.5556, 0.05, 0.5, 1).unwrap();
    let mut g = c.benchmark_group("cov_eval");
    g.bench_function("separable", |b| {
        b.iter(|| sep.eval(black_box(0.4), black_box(17.0)))
    });
    g.bench_function("gneiting_ml", |b| {
        b.iter(|| gml.eval(black_box(0.4), black_box(17.0)))
    });
    g.finish();
}

fn bench_quadrature(c: &mut Criterion) {
    c.bench_function("gauss_hermite_128", |b| {
        b.iter(|| gauss_hermite_weighted(black_box(128)).unwrap())
    });
    let psi = DistanceDensity::closed_form(ConvexBody::interval(1.0).unwrap()).unwrap();
    let model = CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.4).unwrap();
    c.bench_function("sigma2_nk_T1024", |b| {
        b.iter(|| sigma2_nk(&model, &psi, 1, black_box(1024.0), &QuadSpec::default()).unwrap())
    });
}

fn bench_geometry(c: &mut Criterion) {
    let ball = ConvexBody::ball(3, 1.0).unwrap();
    c.bench_function("ball3_density", |b| {
        b.iter(|| distance_density(&ball, black_box(1.1)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_mittag_leffler,
    bench_covariance_eval,
    bench_quadrature,
    bench_geometry
);
criterion_main!(benches);
