use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sfc_bench::{fixture, probe, sigma_x};
use sfc_core::{
    nlm_build, AffinityConfig, CutOperator, GridConfig, GridOperator, PatchConfig, Radius,
    WindowedBilateral,
};

fn bilateral(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_w");
    group.sample_size(10);
    for size in [64, 128] {
        let img = fixture(size);
        let v = probe(size * size);
        let grid = GridOperator::new(&img, GridConfig::new(sigma_x(size), 0.1)).unwrap();
        group.bench_with_input(BenchmarkId::new("grid", size), &v, |b, v| {
            b.iter(|| grid.apply_w(v))
        });
        let windowed = WindowedBilateral::new(
            &img,
            AffinityConfig::new(sigma_x(size), 0.1, Radius::Bounded(15)),
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::new("windowed_r15", size), &v, |b, v| {
            b.iter(|| windowed.apply_w(v))
        });
    }
    group.finish();
}

fn nlm(c: &mut Criterion) {
    let img = fixture(64);
    let v = probe(64 * 64);
    let cfg = PatchConfig {
        patch_radius: 2,
        sigma_n: 0.3,
        sigma_x: sigma_x(64),
        search_radius: 10,
        gaussian_patch_weighting: true,
    };
    let op = nlm_build(&img, cfg).unwrap();
    let mut group = c.benchmark_group("nlm");
    group.sample_size(10);
    group.bench_function("build_64", |b| b.iter(|| nlm_build(&img, cfg).unwrap()));
    group.bench_function("apply_w_64", |b| b.iter(|| op.apply_w(&v)));
    group.finish();
}

criterion_group!(benches, bilateral, nlm);
criterion_main!(benches);
