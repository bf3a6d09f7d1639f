//! Contraction thresholds of the Picard map, shipped as a table and re-checked by `reproduce`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use scatterlab::spacetime::TimeGrid;
use scatterlab::waveop::{picard_solve, Coupling, SolverConfig};
use scatterlab::{sample_profile, Field, Grid, Profile};

use crate::error::{CliError, CliResult};

pub const DEFAULT_TABLE: &str = include_str!("../data/calibration.toml");

/// One calibrated configuration: unit Gaussian data of the given width scaled
/// by `amplitude` is the largest amplitude found to converge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub dim: usize,
    pub p: f64,
    pub mu: i32,
    pub n: usize,
    pub half_width: f64,
    pub width: f64,
    pub t0: f64,
    pub t_max: f64,
    pub intervals: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub failing_amplitude: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTable {
    pub entry: Vec<CalibrationEntry>,
}

impl CalibrationTable {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse {
            path: "calibration table".into(),
            message: e.to_string(),
        })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped calibration table parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("table serializes")
    }
}

impl CalibrationEntry {
    pub fn setup(&self) -> CliResult<(Field, SolverConfig)> {
        let grid = Grid::new(self.dim, self.n, self.half_width)?;
        let unit = sample_profile(&grid, &Profile::gaussian(self.width))?;
        let solver = SolverConfig::new(self.dim, self.p, Coupling::from_mu(self.mu)?, self.t0)?
            .with_times(TimeGrid::new(self.t0, self.t_max, self.intervals)?)
            .with_max_iter(self.max_iter);
        let solver = SolverConfig { tol: self.tol, ..solver };
        Ok((unit, solver))
    }

    /// Whether the Picard iteration converges for `factor * amplitude`.
    pub fn converges_at(&self, factor: f64) -> CliResult<bool> {
        let (unit, solver) = self.setup()?;
        let phi = unit.scaled(Complex64::new(factor * self.amplitude, 0.0));
        match picard_solve(&phi, &solver) {
            Ok((_, report)) => Ok(report.converged),
            Err(e) if !e.is_config() => Ok(false),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_parses_and_roundtrips() {
        let table = CalibrationTable::builtin();
        assert_eq!(table.entry.len(), 3);
        assert_eq!(CalibrationTable::parse(&table.to_toml()).unwrap(), table);
        for e in &table.entry {
            assert!(e.amplitude < e.failing_amplitude);
        }
    }
}
