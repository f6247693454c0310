//! Default rayon pool against a single-thread pool on the heavier kernels.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;
use varexp_core::exponent::{build_exponent, ExponentSpec};
use varexp_core::grid::{make_domain, whitney_decomposition, GridDomain, Shape, TensorField};
use varexp_core::rigidity::{lusin_truncate, rigidity_report};
use varexp_core::varnorm::{luxemburg_norm, maximal_function, MaximalMode};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().expect("default pool");
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("1-thread pool");
    vec![("default", default), ("1-thread", single)]
}

fn field(d: &Arc<GridDomain>) -> TensorField {
    TensorField::vector_fn(d, |x| {
        [
            x[0] * (0.9f64).cos() - x[1] * (0.9f64).sin() + 0.05 * (3.0 * x[1]).sin(),
            x[0] * (0.9f64).sin() + x[1] * (0.9f64).cos() + 0.05 * (2.0 * x[0] * x[1]).cos(),
            0.0,
        ]
    })
}

fn kernels(c: &mut Criterion) {
    let d = make_domain(Shape::unit_square(), 129).unwrap();
    let p = build_exponent(&ExponentSpec::LinearRamp { from: 1.4, to: 2.0, axis: 0 }, &d).unwrap();
    let u = field(&d);
    let mags = TensorField::scalar_fn(&d, |x| 1.0 + (7.0 * x[0]).sin() * x[1]);
    let lshape = make_domain(Shape::Lshape, 129).unwrap();
    let pools = pools();

    let mut group = c.benchmark_group("parallel");
    group.sample_size(10);
    for (name, pool) in &pools {
        group.bench_function(BenchmarkId::new("luxemburg_norm", name), |b| {
            b.iter(|| pool.install(|| luxemburg_norm(black_box(&mags), &p).unwrap()))
        });
        group.bench_function(BenchmarkId::new("maximal_function", name), |b| {
            b.iter(|| pool.install(|| maximal_function(black_box(&mags), MaximalMode::Local)))
        });
        group.bench_function(BenchmarkId::new("rigidity_report", name), |b| {
            b.iter(|| pool.install(|| rigidity_report(black_box(&u), &p).unwrap()))
        });
        group.bench_function(BenchmarkId::new("lusin_truncate", name), |b| {
            b.iter(|| pool.install(|| lusin_truncate(black_box(&u), 1.2).unwrap()))
        });
        group.bench_function(BenchmarkId::new("whitney", name), |b| {
            b.iter(|| pool.install(|| whitney_decomposition(black_box(&lshape))))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
