use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rslmc_core::density::{build_quantile_grid, kde_evaluate, kl_divergence_grid, w1_sorted_1d};
use rslmc_core::reference::{sample_logistic_inverse_cdf, sample_mixture_2d};
use rslmc_core::{DensityGrid, KdeParams, MixtureSpec};

const SAMPLES: usize = 100_000;

fn density(c: &mut Criterion) {
    let a = sample_logistic_inverse_cdf(SAMPLES, 1).samples;
    let b = sample_logistic_inverse_cdf(SAMPLES, 2).samples;
    let grid = build_quantile_grid(&a, 1, 512, 1e-4, 1.0 - 1e-4).unwrap();
    let params = KdeParams::silverman(&a, 1, 3.0).unwrap();
    c.bench_function("kde/1d-512", |bch| {
        bch.iter(|| kde_evaluate(black_box(&a), &params, &grid, 1).unwrap())
    });

    let p = kde_evaluate(&a, &params, &grid, 1).unwrap();
    let q = kde_evaluate(&b, &params, &grid, 1).unwrap();
    c.bench_function("kl/1d-512", |bch| {
        bch.iter(|| kl_divergence_grid(black_box(&p), &q).unwrap())
    });

    let mut sorted_a = a.clone();
    let mut sorted_b = b.clone();
    sorted_a.sort_by(f64::total_cmp);
    sorted_b.sort_by(f64::total_cmp);
    c.bench_function("w1/sorted", |bch| {
        bch.iter(|| w1_sorted_1d(black_box(&sorted_a), &sorted_b).unwrap())
    });

    let m = sample_mixture_2d(&MixtureSpec::benchmark_2d(), SAMPLES / 10, 3)
        .unwrap()
        .samples;
    let grid: DensityGrid = build_quantile_grid(&m, 2, 100, 1e-4, 1.0 - 1e-4).unwrap();
    let params = KdeParams::silverman(&m, 2, 1.0).unwrap();
    c.bench_function("kde/2d-100x100", |bch| {
        bch.iter(|| kde_evaluate(black_box(&m), &params, &grid, 1).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = density
}
criterion_main!(benches);
