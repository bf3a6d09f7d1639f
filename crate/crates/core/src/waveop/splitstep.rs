//! Strang split-step Fourier integration of the NLS on the periodic box, and
//! the cross-check of Picard trajectories against it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Coupling, SolverConfig, Trajectory};
use crate::error::{Error, Result, Warning};
use crate::fft::{fft_nd, Direction};
use crate::grid::{apply_separable, Field, Space};
use crate::numeric::stable_max;
use crate::propagator::{evolve_fresnel, evolve_periodic, WRAP_SHELL, WRAP_TOL};

pub const MIN_STEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct SplitStep {
    pub field: Field,
    /// Largest nonlinear phase increment `|u|^p dt` seen.
    pub max_phase: f64,
    /// `|mass(t1) / mass(t0) - 1|`.
    pub mass_drift: f64,
    pub warnings: Vec<Warning>,
}

/// Evolve `u0` from `t0` to `t1` with `steps` Strang steps of
/// `e^{i dt/2 Delta}`, `u -> u e^{-i mu |u|^p dt}`, `e^{i dt/2 Delta}`.
pub fn splitstep_evolve(u0: &Field, t0: f64, t1: f64, steps: usize, coupling: Coupling, p: f64) -> Result<SplitStep> {
    if u0.space() != Space::Physical {
        return Err(Error::InvalidArgument("split-step expects a physical-space field".into()));
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidArgument(format!(
            "split-step needs at least {MIN_STEPS} steps, got {steps}"
        )));
    }
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!("need t1 >= t0, got {t0} -> {t1}")));
    }
    let grid = *u0.grid();
    let dt = (t1 - t0) / steps as f64;
    let mu = coupling.mu();
    let dual = grid.dual();
    let n = grid.n();
    let checker = |scale: f64| -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new(if j % 2 == 0 { scale } else { -scale }, 0.0))
            .collect()
    };
    let sign = checker(1.0);
    let inv_n = checker(1.0 / n as f64);
    // half-step multiplier with the checkerboard signs of both transforms folded in
    let half: Vec<Complex64> = (0..n)
        .map(|m| {
            let xi = dual.node(m);
            Complex64::from_polar(1.0, -0.5 * dt * xi * xi)
        })
        .collect();
    let linear = |values: &mut Vec<Complex64>| {
        apply_separable(values, &grid, &sign);
        fft_nd(values, n, grid.dim(), Direction::Forward);
        apply_separable(values, &dual, &half);
        fft_nd(values, n, grid.dim(), Direction::Inverse);
        apply_separable(values, &grid, &inv_n);
    };
    let mut values = u0.values().to_vec();
    let mut max_phase: f64 = 0.0;
    let half_p = p / 2.0;
    for _ in 0..steps {
        linear(&mut values);
        if mu != 0.0 {
            let phase = stable_max(&values, |v| v.norm_sqr().powf(half_p)) * dt;
            if phase > PI / 4.0 {
                return Err(Error::StepTooLarge { phase });
            }
            max_phase = max_phase.max(phase);
            values.par_iter_mut().for_each(|v| {
                let rot = -mu * v.norm_sqr().powf(half_p) * dt;
                *v *= Complex64::from_polar(1.0, rot);
            });
        }
        linear(&mut values);
    }
    let field = Field::from_parts(grid, Space::Physical, values);
    let mass0 = u0.mass();
    let mass_drift = if mass0 > 0.0 { (field.mass() / mass0 - 1.0).abs() } else { 0.0 };
    let mut warnings = Vec::new();
    let fraction = field.boundary_mass_fraction(WRAP_SHELL);
    if fraction > WRAP_TOL {
        warnings.push(Warning::WraparoundContamination { fraction });
    }
    Ok(SplitStep {
        field,
        max_phase,
        mass_drift,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    /// Zero-padding factor applied to profiles before the Fresnel transform at `T`.
    pub padding: usize,
    /// Nodes `t_j <= window * T` are compared.
    pub window: f64,
    /// Split-step steps per time-grid segment.
    pub steps_per_segment: usize,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            padding: 2,
            window: 2.0,
            steps_per_segment: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossvalidation {
    pub times: Vec<f64>,
    pub discrepancies: Vec<f64>,
    pub max_discrepancy: f64,
    pub max_phase: f64,
    pub warnings: Vec<Warning>,
}

/// Evolve `u(T)` forward by split-step on the (refined) Fresnel frame of `T`
/// and compare with the trajectory at the window nodes. Both sides are pulled
/// back to the frame of `T` by the free flow, where the split-step solution
/// lives, so no interpolation is involved.
pub fn crossvalidate(traj: &Trajectory, cfg: &SolverConfig, xv: &CrossvalConfig) -> Result<Crossvalidation> {
    let nodes = traj.times().nodes();
    let t0 = nodes[0];
    let last = nodes.iter().rposition(|&t| t <= xv.window * t0 * (1.0 + 1e-12)).unwrap_or(0);
    if last == 0 {
        return Err(Error::InvalidArgument(format!(
            "validation window {} contains no node after T",
            xv.window
        )));
    }
    let frame = |j: usize| -> Result<Field> {
        let padded = traj.profiles()[j].padded(xv.padding)?;
        Ok(evolve_fresnel(&padded, t0)?.field)
    };
    let mut u = frame(0)?;
    let mut times = Vec::new();
    let mut discrepancies = Vec::new();
    let mut max_phase: f64 = 0.0;
    let mut warnings = Vec::new();
    for j in 1..=last {
        let step = splitstep_evolve(&u, nodes[j - 1], nodes[j], xv.steps_per_segment, cfg.coupling, cfg.p())?;
        max_phase = max_phase.max(step.max_phase);
        for w in step.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        u = step.field;
        let z_split = evolve_periodic(&u, -(nodes[j] - t0))?.field;
        let z_picard = frame(j)?;
        discrepancies.push(z_split.relative_l2_distance(&z_picard)?);
        times.push(nodes[j]);
    }
    let max_discrepancy = discrepancies.iter().copied().fold(0.0, f64::max);
    Ok(Crossvalidation {
        times,
        discrepancies,
        max_discrepancy,
        max_phase,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profile::{sample_profile, Profile};
    use crate::spacetime::TimeGrid;
    use crate::waveop::picard_solve;

    fn gaussian(amplitude: f64) -> Field {
        let grid = Grid::new(1, 512, 20.0).unwrap();
        sample_profile(&grid, &Profile::gaussian(1.0).amplified(amplitude)).unwrap()
    }

    #[test]
    fn linear_splitting_is_exact() {
        let f = gaussian(1.0);
        let s = splitstep_evolve(&f, 0.0, 0.8, 100, Coupling::Disabled, 3.0).unwrap();
        let e = evolve_periodic(&f, 0.8).unwrap().field;
        assert!(s.field.relative_l2_distance(&e).unwrap() < 1e-10);
    }

    #[test]
    fn mass_conservation_and_errors() {
        let f = gaussian(1.0);
        let s = splitstep_evolve(&f, 0.0, 0.5, 200, Coupling::Focusing, 3.0).unwrap();
        assert!(s.mass_drift < 1e-10);
        assert!(splitstep_evolve(&f, 0.0, 0.5, 50, Coupling::Focusing, 3.0).is_err());
        let big = gaussian(5.0);
        assert!(matches!(
            splitstep_evolve(&big, 0.0, 1.0, 100, Coupling::Defocusing, 3.0),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn second_order_self_convergence() {
        let f = gaussian(1.0);
        let run = |n| splitstep_evolve(&f, 0.0, 0.5, n, Coupling::Defocusing, 3.0).unwrap().field;
        let (a, b, c) = (run(100), run(200), run(400));
        let e1 = a.sub(&b).unwrap().l2_norm();
        let e2 = b.sub(&c).unwrap().l2_norm();
        let ratio = e1 / e2;
        assert!((ratio / 4.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn crossvalidation_small_data() {
        let phi = gaussian(0.05);
        let tg = TimeGrid::new(1.0, 1000.0, 32).unwrap();
        for coupling in [Coupling::Disabled, Coupling::Defocusing] {
            let cfg = SolverConfig::new(1, 3.0, coupling, 1.0).unwrap().with_times(tg.clone());
            let (traj, report) = picard_solve(&phi, &cfg).unwrap();
            assert!(report.converged);
            let xv = crossvalidate(&traj, &cfg, &CrossvalConfig::default()).unwrap();
            let bound = if coupling == Coupling::Disabled { 1e-8 } else { 1e-3 };
            assert!(xv.max_discrepancy <= bound, "{coupling:?}: {}", xv.max_discrepancy);
        }
        let zero = Trajectory::free(&gaussian(0.0), &tg);
        let cfg = SolverConfig::new(1, 3.0, Coupling::Defocusing, 1.0).unwrap().with_times(tg);
        assert_eq!(crossvalidate(&zero, &cfg, &CrossvalConfig::default()).unwrap().max_discrepancy, 0.0);
    }
}
