//! Criterion benchmarks for the hot paths: stencil assembly, the FFT-based
//! operator apply at several grid sizes, and a full conjugate-gradient solve.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fraclap::krylov::CgConfig;
use fraclap::pde::{operator_for, poisson_solve, unit_box};
use fraclap::singquad::QuadConfig;
use fraclap::stencil::{build_stencil_2d, FracParams};
use fraclap::{Field, GridSpec, StencilStore};

fn bench_stencil_assembly(c: &mut Criterion) {
    let params = FracParams::new(2, 1.5).unwrap();
    let quad = QuadConfig::default();
    let mut group = c.benchmark_group("stencil_build_2d");
    for n in [32usize, 64, 128] {
        group.throughput(Throughput::Elements(((n + 1) * (n + 1)) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| build_stencil_2d(&params, n, 2.0 / n as f64, &quad).unwrap());
        });
    }
    group.finish();
}

fn bench_apply_fft(c: &mut Criterion) {
    let params = FracParams::new(2, 1.5).unwrap();
    let mut store = StencilStore::in_memory(QuadConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("apply_fft_2d");
    for n in [64usize, 128, 256] {
        let grid = GridSpec::from_box(&unit_box(2), 2.0 / n as f64).unwrap();
        let op = operator_for(&mut store, &params, &grid).unwrap();
        let u = Field {
            grid: grid.clone(),
            values: (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        group.throughput(Throughput::Elements(grid.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| op.apply_fft(&u).unwrap());
        });
    }
    group.finish();
}

fn bench_cg_solve(c: &mut Criterion) {
    let params = FracParams::new(2, 1.0).unwrap();
    let mut store = StencilStore::in_memory(QuadConfig::default());
    let grid = GridSpec::from_box(&unit_box(2), 1.0 / 32.0).unwrap();
    let op = operator_for(&mut store, &params, &grid).unwrap();
    let f = Field::from_fn(&grid, |_| 1.0);
    let cg = CgConfig::default();
    c.bench_function("poisson_solve_64x64", |b| {
        b.iter(|| poisson_solve(&op, &f, &cg).unwrap());
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = bench_stencil_assembly, bench_apply_fft, bench_cg_solve
}
criterion_main!(kernels);
