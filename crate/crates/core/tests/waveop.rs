use num_complex::Complex64;
use scatterlab::spacetime::TimeGrid;
use scatterlab::waveop::{nonlinear_estimates, picard_solve, picard_solve_from, trajectory_distance, Coupling, SolverConfig, Start};
use scatterlab::{sample_profile, Grid, Profile};

fn family() -> Vec<(usize, f64, Grid)> {
    vec![
        (1, 3.0, Grid::new(1, 256, 20.0).unwrap()),
        (2, 1.5, Grid::new(2, 64, 8.0).unwrap()),
        (3, 1.2, Grid::new(3, 32, 6.0).unwrap()),
    ]
}

fn solver(d: usize, p: f64, coupling: Coupling) -> SolverConfig {
    SolverConfig::new(d, p, coupling, 1.0)
        .unwrap()
        .with_times(TimeGrid::new(1.0, 1000.0, 32).unwrap())
}

#[test]
fn nonlinear_estimates_are_bounded_across_the_family() {
    for (d, p, grid) in family() {
        let cfg = solver(d, p, Coupling::Defocusing);
        for profile in [Profile::gaussian(1.0), Profile::bump(1.0)] {
            for amp in [0.02, 0.1] {
                let phi = sample_profile(&grid, &profile.amplified(amp)).unwrap();
                let (traj, rep) = picard_solve(&phi, &cfg).unwrap();
                assert!(rep.converged, "d={d} {profile:?} A={amp}");
                let est = nonlinear_estimates(&traj, &cfg).unwrap();
                assert!(est.nle <= 10.0, "d={d} nle {}", est.nle);
                assert!(est.nle2 <= 10.0, "d={d} nle2 {}", est.nle2);
            }
        }
    }
}

#[test]
fn residuals_decay_and_fixed_point_is_unique() {
    for (d, p, grid) in family() {
        let cfg = solver(d, p, Coupling::Focusing);
        let phi = sample_profile(&grid, &Profile::gaussian(1.0).amplified(0.05)).unwrap();
        let (a, rep) = picard_solve(&phi, &cfg).unwrap();
        // nonincreasing after the first node, up to quadrature noise
        for w in rep.residuals[1..].windows(2) {
            assert!(w[1] <= w[0] * 1.05, "d={d}: {:?}", rep.residuals);
        }
        let (b, _) = picard_solve_from(&phi, &cfg, Start::Zero).unwrap();
        let dist = trajectory_distance(&a, &b, &cfg.exponents).unwrap();
        assert!(dist <= 3.0 * cfg.tol, "d={d}: {dist}");
    }
}

#[test]
fn contraction_ratio_tracks_amplitude() {
    let (d, p, grid) = family().remove(0);
    let cfg = solver(d, p, Coupling::Defocusing);
    let phi = sample_profile(&grid, &Profile::gaussian(1.0).amplified(0.08)).unwrap();
    let ratio = |s: f64| picard_solve(&phi.scaled(Complex64::new(s, 0.0)), &cfg).unwrap().1.ratios[0];
    let r = ratio(1.0) / ratio(0.5);
    assert!((r / 8.0 - 1.0).abs() < 0.5, "{r}");
}
