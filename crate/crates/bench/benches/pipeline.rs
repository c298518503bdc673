//! Benchmarks for the hot paths: moment polynomial evaluation, the simplex
//! feasibility and minimum-mass programs, Wasserstein distance, and the
//! whole estimation pipeline at a realistic scale.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lmm_core::lpsolve::{discretize, solve_feasibility, solve_min_mass, FeasibilityProblem};
use lmm_core::moments::g;
use lmm_core::sampling::{derive_rng, draw_poissonized, STREAM_ESTIMATOR, STREAM_SAMPLING};
use lmm_core::{lmm_estimate, wasserstein_1d, DiscreteDistribution, GridMeasure, LmmConfig};

fn bench_moment_polynomial(c: &mut Criterion) {
    c.bench_function("g(k=4) over 50 counts", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for m in 0..50u64 {
                acc += g(4, black_box(0.01), m as f64 / 1000.0, 1000.0).unwrap();
            }
            black_box(acc)
        })
    });
}

/// A moment program shaped like a mid-partition interval from a uniform(1000)
/// run: 512 grid points, two centered moments from a planted 3-atom measure.
fn mid_interval_problem(total_mass: Option<f64>) -> FeasibilityProblem {
    let center = 0.05f64;
    let scale = 0.004f64;
    let grid = discretize(0.038, 0.066, 512, false).unwrap();
    let atoms = [0.042, 0.051, 0.06];
    let targets: Vec<f64> = (1..=2)
        .map(|k| atoms.iter().map(|a| (a - center).powi(k)).sum())
        .collect();
    let tolerances: Vec<f64> = (1..=2).map(|k| 3.0 * scale.powi(k)).collect();
    FeasibilityProblem::new(
        grid, center, scale, 2, targets, tolerances, total_mass, None,
    )
    .unwrap()
}

fn bench_lp(c: &mut Criterion) {
    let fixed = mid_interval_problem(Some(3.0));
    c.bench_function("simplex fixed-mass feasibility, 512 columns", |b| {
        b.iter(|| black_box(solve_feasibility(&fixed).unwrap()))
    });

    let free = mid_interval_problem(None);
    c.bench_function("bisected minimum-mass program, 512 columns", |b| {
        b.iter(|| black_box(solve_min_mass(&free, 100.0, true).unwrap()))
    });
}

fn bench_wasserstein(c: &mut Criterion) {
    let n = 1000;
    let left = GridMeasure::from_atoms((0..n).map(|i| (i as f64 / n as f64, 1.0))).unwrap();
    let right =
        GridMeasure::from_atoms((0..n).map(|i| ((i as f64 + 0.3) / n as f64, 1.0))).unwrap();
    c.bench_function("wasserstein_1d, 1000 atoms each", |b| {
        b.iter(|| black_box(wasserstein_1d(&left, &right).unwrap()))
    });
}

fn bench_full_pipeline(c: &mut Criterion) {
    let s = 1000usize;
    let dist = DiscreteDistribution::new(vec![1.0 / s as f64; s]).unwrap();
    let mut sample_rng = derive_rng(0, 0, STREAM_SAMPLING);
    let counts = draw_poissonized(&dist, 2000.0, &mut sample_rng).unwrap();
    let config = LmmConfig::default();
    let est_rng = derive_rng(0, 0, STREAM_ESTIMATOR);
    c.bench_function("lmm_estimate, uniform(1000) at rate 2000", |b| {
        b.iter(|| {
            let mut rng = est_rng.clone();
            black_box(lmm_estimate(&counts, &config, &mut rng).unwrap())
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_moment_polynomial, bench_lp, bench_wasserstein, bench_full_pipeline
}
criterion_main!(benches);
