use criterion::{black_box, criterion_group, criterion_main, Criterion};

use scatterlab::montecarlo::{linear_tail_experiment, LinearTailConfig, Thresholds};
use scatterlab::propagator::{evolve, Backend};
use scatterlab::randomizer::{build_partition, Ensemble};
use scatterlab::spacetime::{spacetime_norm, TimeGrid};
use scatterlab::derive_exponents;
use scatterlab_bench::gaussian;

fn propagator(c: &mut Criterion) {
    let f1 = gaussian(1, 1024, 40.0);
    let f2 = gaussian(2, 128, 16.0);
    c.bench_function("fresnel_d1_n1024", |b| b.iter(|| evolve(black_box(&f1), 100.0, Backend::Fresnel).unwrap()));
    c.bench_function("periodic_d1_n1024", |b| b.iter(|| evolve(black_box(&f1), 1.0, Backend::Periodic).unwrap()));
    c.bench_function("fresnel_d2_n128", |b| b.iter(|| evolve(black_box(&f2), 100.0, Backend::Fresnel).unwrap()));
}

fn randomizer(c: &mut Criterion) {
    let f = gaussian(2, 64, 8.0);
    let pou = build_partition(f.grid()).unwrap();
    let mut trial = 0;
    c.bench_function("randomize_d2_n64", |b| {
        b.iter(|| {
            trial += 1;
            pou.randomize(black_box(&f), Ensemble::Gaussian, 0, trial).unwrap()
        })
    });
}

fn norms(c: &mut Criterion) {
    let f = gaussian(1, 256, 20.0);
    let tg = TimeGrid::new(1.0, 1000.0, 64).unwrap();
    c.bench_function("stnorm_d1_n256_m64", |b| b.iter(|| spacetime_norm(black_box(&f), 4.0, 6.0, &tg).unwrap()));
}

fn montecarlo(c: &mut Criterion) {
    let f = gaussian(1, 128, 12.0);
    let pou = build_partition(f.grid()).unwrap();
    let exps = derive_exponents(1, 3.0, 0.5).unwrap();
    let cfg = LinearTailConfig {
        ensemble: Ensemble::Rademacher,
        thresholds: Thresholds::Explicit(vec![0.5, 1.0]),
        t_grid: vec![1.0, 4.0],
        horizon_factor: 1024.0,
        intervals: 65,
        trials: 50,
        seed: 0,
    };
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    group.bench_function("linear_tail_50_trials", |b| {
        b.iter(|| linear_tail_experiment(black_box(&f), &pou, &exps, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, propagator, randomizer, norms, montecarlo);
criterion_main!(benches);
