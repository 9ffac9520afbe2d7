//! Compares the parallel and sequential batch-evaluation paths on the
//! estimator kernels that dominate solver runtime.
//!
//! Run with `cargo bench -p zo-minimax`. Building with
//! `--no-default-features` makes the public estimators take the sequential
//! path; the explicit `seq`/`par` pairs below compare both inside one build.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array1;
use zo_minimax::batch;
use zo_minimax::estimators::{coord_grad, gauss_grad_x, Block};
use zo_minimax::problems::{sample_batch, MinimaxProblem, Regime};
use zo_minimax::quadratic::QuadraticSaddle;
use zo_minimax::rng::{gaussian_directions, substream};

fn instance(d: usize) -> QuadraticSaddle {
    let mut rng = substream(17, "bench-instance");
    QuadraticSaddle::generate(d, d, 5.0, 1.0, 0.1, Regime::FiniteSum(256), &mut rng).unwrap()
}

fn bench_gauss(c: &mut Criterion) {
    let d = 10;
    let q = instance(d);
    let x = Array1::zeros(d);
    let y = Array1::zeros(d);
    let mut group = c.benchmark_group("gauss_grad_x");
    for &batch_size in &[64usize, 512, 4096] {
        let mut rng = substream(5, "bench-draws");
        let samples = sample_batch(&q, batch_size, &mut rng).unwrap();
        let dirs = gaussian_directions(&mut rng, batch_size, d);
        group.bench_with_input(
            BenchmarkId::new("dispatch", batch_size),
            &batch_size,
            |b, _| {
                b.iter(|| {
                    gauss_grad_x(&q, x.view(), y.view(), black_box(&samples), &dirs, 1e-3).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_coord(c: &mut Criterion) {
    let d = 10;
    let q = instance(d);
    let x = Array1::zeros(d);
    let y = Array1::zeros(d);
    let mut group = c.benchmark_group("coord_grad_both");
    for &batch_size in &[16usize, 128, 1024] {
        let mut rng = substream(6, "bench-draws");
        let samples = sample_batch(&q, batch_size, &mut rng).unwrap();
        group.bench_with_input(
            BenchmarkId::new("dispatch", batch_size),
            &batch_size,
            |b, _| {
                b.iter(|| {
                    coord_grad(&q, x.view(), y.view(), black_box(&samples), 1e-3, Block::Both)
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_map_paths(c: &mut Criterion) {
    let d = 10;
    let q = instance(d);
    let x = Array1::<f64>::zeros(d);
    let y = Array1::<f64>::zeros(d);
    let mut rng = substream(7, "bench-draws");
    let batch_size = 2048;
    let samples = sample_batch(&q, batch_size, &mut rng).unwrap();
    let dirs = gaussian_directions(&mut rng, batch_size, d);
    let work = |i: usize| {
        let shifted = &x + &(&dirs[i] * 1e-3);
        q.eval(shifted.view(), y.view(), &samples[i]) - q.eval(x.view(), y.view(), &samples[i])
    };

    let mut group = c.benchmark_group("batch_map");
    group.bench_function("seq", |b| {
        b.iter(|| batch::map_indexed_seq(black_box(batch_size), work))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("par", |b| {
        b.iter(|| batch::map_indexed_par(black_box(batch_size), work))
    });
    group.finish();
}

criterion_group!(benches, bench_gauss, bench_coord, bench_map_paths);
criterion_main!(benches);
