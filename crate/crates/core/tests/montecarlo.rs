use scatterlab::montecarlo::{
    linear_tail_experiment, moment_check, random_sum_samples, wilson_interval, LinearTailConfig, Thresholds,
};
use scatterlab::randomizer::{build_partition, Ensemble};
use scatterlab::{derive_exponents, sample_profile, Grid, Profile};

#[test]
fn wilson_intervals_cover_the_gaussian_tail() {
    let mut covered = 0;
    for cell in 0..100u64 {
        let eta = 0.03 * cell as f64;
        let exact = libm::erfc(eta / std::f64::consts::SQRT_2);
        let samples = random_sum_samples(Ensemble::Gaussian, &[1.0], 4000, 1000 + cell);
        let k = samples.iter().filter(|s| **s >= eta).count();
        let (lo, hi) = wilson_interval(k, samples.len());
        covered += usize::from(lo <= exact && exact <= hi);
    }
    assert!(covered >= 93, "{covered}/100");
}

#[test]
fn gaussian_moment_ratios_stay_below_one() {
    let alphas: Vec<f64> = (2..=12).map(f64::from).collect();
    let rep = moment_check(Ensemble::Gaussian, &[0.3, -0.4, 1.2], &alphas, 20_000, 4).unwrap();
    for row in &rep.rows {
        assert!(row.ratio < 1.0, "alpha {}: {}", row.alpha, row.ratio);
    }
}

fn small_surface(threads: usize) -> String {
    let grid = Grid::new(1, 128, 12.0).unwrap();
    let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
    let pou = build_partition(&grid).unwrap();
    let exps = derive_exponents(1, 3.0, 0.5).unwrap();
    let cfg = LinearTailConfig {
        ensemble: Ensemble::Rademacher,
        thresholds: Thresholds::Explicit(vec![0.2, 0.4, 0.6, 0.8, 1.0]),
        t_grid: vec![1.0, 2.0, 8.0],
        horizon_factor: 1024.0,
        intervals: 65,
        trials: 300,
        seed: 12,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let rep = pool.install(|| linear_tail_experiment(&f, &pou, &exps, &cfg)).unwrap();
    for t in &cfg.t_grid {
        let cells = rep.cells_at_t(*t);
        assert!(cells.windows(2).all(|w| w[1].failures <= w[0].failures));
    }
    for eta in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let f: Vec<usize> = cfg.t_grid.iter().map(|t| rep.cell(eta, Some(*t)).unwrap().failures).collect();
        assert!(f.windows(2).all(|w| w[1] <= w[0]), "{f:?}");
    }
    for c in &rep.cells {
        assert!(c.failures <= c.trials && (0.0..=1.0).contains(&c.p_hat));
    }
    serde_json::to_string(&rep).unwrap()
}

#[test]
fn linear_surface_is_monotone_and_thread_independent() {
    assert_eq!(small_surface(1), small_surface(3));
}
