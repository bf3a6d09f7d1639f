//! Final-state problem on `(T, inf)`: the Duhamel operator, Picard
//! construction of the solution scattering to a given state, split-step
//! cross-validation, and the pseudoconformal transform.
//!
//! Solutions are stored in the interaction picture: the profile
//! `w(t) = e^{-it Delta} u(t)` lives on the base grid of the final state,
//! and the physical field `u(t)` is recovered on its Fresnel frame on demand.

mod duhamel;
mod picard;
mod pseudoconformal;
mod splitstep;

pub use duhamel::{duhamel, segment_weights, DuhamelValue, Forcing, TailEstimate, TailModel};
pub use picard::{
    apply_map, calibrate_eta0, first_correction, nonlinear_estimates, picard_solve, picard_solve_from,
    trajectory_distance, Calibration, NonlinearEstimates, PicardReport, SpaceTimeNorms, Start,
};
pub use pseudoconformal::{inverse_pseudoconformal, pseudoconformal, Pseudoconformal};
pub use splitstep::{crossvalidate, splitstep_evolve, CrossvalConfig, Crossvalidation, SplitStep};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{derive_exponents, ExponentSet};
use crate::grid::{Field, Grid};
use crate::propagator::evolve_fresnel;
use crate::spacetime::TimeGrid;

/// Sign of the nonlinearity in `(i d_t + Delta) u = mu |u|^p u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `mu = +1`.
    Defocusing,
    /// `mu = -1`.
    Focusing,
    /// `mu = 0`: the free flow, for validation.
    Disabled,
}

impl Coupling {
    pub fn mu(self) -> f64 {
        match self {
            Coupling::Defocusing => 1.0,
            Coupling::Focusing => -1.0,
            Coupling::Disabled => 0.0,
        }
    }

    pub fn from_mu(mu: i32) -> Result<Self> {
        match mu {
            1 => Ok(Coupling::Defocusing),
            -1 => Ok(Coupling::Focusing),
            0 => Ok(Coupling::Disabled),
            other => Err(Error::InvalidArgument(format!("mu must be +1, -1 or 0, got {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub coupling: Coupling,
    pub exponents: ExponentSet,
    pub times: TimeGrid,
    pub max_iter: usize,
    /// Stopping tolerance on the iterate distance.
    pub tol: f64,
    pub tail: TailModel,
}

impl SolverConfig {
    /// Defaults: `T_max = 1000 T`, 64 intervals, 10 iterations, tolerance 1e-8, fitted tail.
    pub fn new(dim: usize, p: f64, coupling: Coupling, t0: f64) -> Result<Self> {
        Ok(SolverConfig {
            coupling,
            exponents: derive_exponents(dim, p, 0.5)?,
            times: TimeGrid::default_for(t0)?,
            max_iter: 10,
            tol: 1e-8,
            tail: TailModel::Fitted,
        })
    }

    pub fn with_times(mut self, times: TimeGrid) -> Self {
        self.times = times;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn p(&self) -> f64 {
        self.exponents.p
    }

    pub fn dim(&self) -> usize {
        self.exponents.d
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 4 {
            return Err(Error::InvalidArgument(format!(
                "max_iter must be at least 4, got {}",
                self.max_iter
            )));
        }
        if self.times.t0() < 1.0 {
            return Err(Error::InvalidArgument("solver needs T >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Profiles `w(t_j)` at the nodes of a time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: TimeGrid,
    profiles: Vec<Field>,
}

impl Trajectory {
    pub fn new(times: TimeGrid, profiles: Vec<Field>) -> Result<Self> {
        if profiles.len() != times.nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "{} profiles for {} nodes",
                profiles.len(),
                times.nodes().len()
            )));
        }
        let base = *profiles[0].grid();
        if profiles.iter().any(|w| !w.grid().approx_eq(&base)) {
            return Err(Error::GridMismatch("profiles on different grids".into()));
        }
        if profiles.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite profile".into()));
        }
        Ok(Trajectory { times, profiles })
    }

    /// The free flow of `phi`: every profile equals `phi`.
    pub fn free(phi: &Field, times: &TimeGrid) -> Self {
        Trajectory {
            times: times.clone(),
            profiles: vec![phi.clone(); times.nodes().len()],
        }
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn base(&self) -> &Grid {
        self.profiles[0].grid()
    }

    pub fn profiles(&self) -> &[Field] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// `u(t_j)` on its Fresnel frame.
    pub fn field_at(&self, j: usize) -> Result<Field> {
        Ok(evolve_fresnel(&self.profiles[j], self.times.nodes()[j])?.field)
    }

    /// Scattering residuals `||u(t_j) - e^{it_j Delta} phi||_2 = ||w(t_j) - phi||_2`.
    pub fn scattering_residual(&self, phi: &Field) -> Result<Vec<f64>> {
        self.profiles
            .par_iter()
            .map(|w| Ok(w.sub(phi)?.l2_norm()))
            .collect()
    }
}

/// `|u|^p u`.
pub(crate) fn nonlinearity(u: &Field, p: f64) -> Field {
    let half = p / 2.0;
    let values: Vec<Complex64> = u
        .values()
        .par_iter()
        .map(|v| {
            let m = v.norm_sqr();
            if m == 0.0 {
                Complex64::default()
            } else {
                v * m.powf(half)
            }
        })
        .collect();
    Field::from_parts(*u.grid(), u.space(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Space;

    #[test]
    fn coupling_signs() {
        assert_eq!(Coupling::from_mu(1).unwrap().mu(), 1.0);
        assert_eq!(Coupling::from_mu(-1).unwrap().mu(), -1.0);
        assert!(Coupling::from_mu(2).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig::new(1, 3.0, Coupling::Defocusing, 1.0).unwrap();
        assert!(cfg.validate().is_ok());
        assert!(cfg.clone().with_max_iter(3).validate().is_err());
        assert!(SolverConfig::new(1, 2.0, Coupling::Defocusing, 1.0).is_err());
        assert!(SolverConfig::new(1, 3.0, Coupling::Defocusing, 0.5).is_err());
    }

    #[test]
    fn nonlinearity_is_pointwise() {
        let grid = Grid::new(1, 8, 2.0).unwrap();
        let vals: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let f = Field::new(grid, Space::Physical, vals.clone()).unwrap();
        let g = nonlinearity(&f, 3.0);
        for (a, b) in vals.iter().zip(g.values()) {
            assert!((a * a.norm().powi(3) - b).norm() < 1e-12);
        }
    }
}
