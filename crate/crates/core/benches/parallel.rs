//! One worker vs the default pool on the data-parallel kernels.
//!
//! `cargo bench -p ergograph --bench parallel`; with
//! `--no-default-features` both rows use the sequential fallback.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ergograph::attractor::{Hutchinson, HutchinsonMode};
use ergograph::ergodics::lyapunov_batch;
use ergograph::family::{FamilyConfig, FiberMaps, PlateauFamily};
use ergograph::geometry::{GridGeometry, GridSet};
use ergograph::graph::sync_test;
use ergograph::par;

fn pools() -> [(&'static str, usize); 2] {
    [("1-thread", 1), ("pool", 0)]
}

fn bench(c: &mut Criterion) {
    let fam: Arc<dyn FiberMaps> = Arc::new(PlateauFamily::new(FamilyConfig::default()).unwrap());
    let dom = fam.domain();
    let op = Hutchinson::for_family(&fam, HutchinsonMode::Generators);
    let x = GridSet::from_disk(GridGeometry::for_disk(&dom, 512), &dom);

    let mut g = c.benchmark_group("hutchinson_step_512");
    g.sample_size(10);
    for (label, n) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(label), &n, |b, &n| {
            b.iter(|| par::with_threads(n, || black_box(op.step(&x))))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("lyapunov_16x20000");
    g.sample_size(10);
    for (label, n) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(label), &n, |b, &n| {
            b.iter(|| par::with_threads(n, || black_box(lyapunov_batch(fam.as_ref(), 16, 20_000, 1).mean)))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("sync_100");
    for (label, n) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(label), &n, |b, &n| {
            b.iter(|| par::with_threads(n, || black_box(sync_test(fam.as_ref(), 100, 5000, 1e-8, 2).report)))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
