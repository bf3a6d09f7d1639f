//! Experiment configuration: TOML (or JSON) files with optional flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scatterlab::montecarlo::Thresholds;
use scatterlab::propagator::Backend;
use scatterlab::randomizer::Ensemble;
use scatterlab::{derive_exponents, ExponentSet, Grid, Profile};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Exponents,
    Evolve,
    Stnorm,
    Randomize,
    Waveop,
    Moments,
    ScalarTail,
    LinearTail,
    FlrTail,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Exponents => "exponents",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Stnorm => "stnorm",
            ExperimentKind::Randomize => "randomize",
            ExperimentKind::Waveop => "waveop",
            ExperimentKind::Moments => "moments",
            ExperimentKind::ScalarTail => "scalar-tail",
            ExperimentKind::LinearTail => "linear-tail",
            ExperimentKind::FlrTail => "flr-tail",
        }
    }

    fn needs_input(self) -> bool {
        !matches!(
            self,
            ExperimentKind::Exponents | ExperimentKind::Moments | ExperimentKind::ScalarTail
        )
    }
}

fn default_dim() -> usize {
    1
}
fn default_p() -> f64 {
    3.0
}
fn default_mu() -> i32 {
    1
}
fn default_a_fraction() -> f64 {
    0.5
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: Option<usize>,
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub profile: Option<Profile>,
    pub field: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    /// Lebesgue exponent; the max-norm when unset.
    pub r: Option<f64>,
    #[serde(default = "DecaySpec::default_t_min")]
    pub t_min: f64,
    #[serde(default = "DecaySpec::default_t_max")]
    pub t_max: f64,
    #[serde(default = "DecaySpec::default_samples")]
    pub samples: usize,
}

impl DecaySpec {
    fn default_t_min() -> f64 {
        10.0
    }
    fn default_t_max() -> f64 {
        1000.0
    }
    fn default_samples() -> usize {
        16
    }
}

impl Default for DecaySpec {
    fn default() -> Self {
        DecaySpec {
            r: None,
            t_min: Self::default_t_min(),
            t_max: Self::default_t_max(),
            samples: Self::default_samples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Evaluation time for `evolve`.
    pub t: Option<f64>,
    /// Lower endpoint `T`.
    #[serde(default = "TimeSpec::default_t0")]
    pub t0: f64,
    /// Horizon; defaults to `1000 T`.
    pub t_max: Option<f64>,
    #[serde(default = "TimeSpec::default_intervals")]
    pub intervals: usize,
    #[serde(default)]
    pub backend: Backend,
    pub decay: Option<DecaySpec>,
}

impl TimeSpec {
    fn default_t0() -> f64 {
        1.0
    }
    fn default_intervals() -> usize {
        64
    }

    pub fn horizon(&self) -> f64 {
        self.t_max.unwrap_or(1000.0 * self.t0)
    }
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            t: None,
            t0: Self::default_t0(),
            t_max: None,
            intervals: Self::default_intervals(),
            backend: Backend::default(),
            decay: None,
        }
    }
}

/// Space-time exponents; the critical pair `(q, r)` when unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub q: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "SolverSpec::default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "SolverSpec::default_tol")]
    pub tol: f64,
    #[serde(default = "SolverSpec::default_true")]
    pub crossval: bool,
    /// Bisect the data amplitude for the contraction threshold instead of solving once.
    #[serde(default)]
    pub calibrate: bool,
}

impl SolverSpec {
    fn default_max_iter() -> usize {
        10
    }
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_true() -> bool {
        true
    }
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            max_iter: Self::default_max_iter(),
            tol: Self::default_tol(),
            crossval: true,
            calibrate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub trials: Option<usize>,
    pub thresholds: Option<Thresholds>,
    #[serde(default = "MonteCarloSpec::default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "MonteCarloSpec::default_horizon_factor")]
    pub horizon_factor: f64,
    #[serde(default = "MonteCarloSpec::default_intervals")]
    pub intervals: usize,
    /// Fourier-Lebesgue exponent; `rho0` when unset.
    pub rho: Option<f64>,
    #[serde(default = "MonteCarloSpec::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "MonteCarloSpec::default_coefficients")]
    pub coefficients: Vec<f64>,
}

impl MonteCarloSpec {
    fn default_t_grid() -> Vec<f64> {
        vec![1.0, 4.0, 16.0]
    }
    fn default_horizon_factor() -> f64 {
        1024.0
    }
    fn default_intervals() -> usize {
        65
    }
    fn default_alphas() -> Vec<f64> {
        vec![2.0, 4.0, 6.0, 8.0, 12.0]
    }
    fn default_coefficients() -> Vec<f64> {
        vec![1.0]
    }

    /// Minimum trial count per cell for each experiment.
    pub fn min_trials(kind: ExperimentKind) -> usize {
        match kind {
            ExperimentKind::Moments => 10_000,
            ExperimentKind::ScalarTail => 100_000,
            ExperimentKind::LinearTail => 500,
            ExperimentKind::FlrTail => 1000,
            _ => 1,
        }
    }
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        MonteCarloSpec {
            trials: None,
            thresholds: None,
            t_grid: Self::default_t_grid(),
            horizon_factor: Self::default_horizon_factor(),
            intervals: Self::default_intervals(),
            rho: None,
            alphas: Self::default_alphas(),
            coefficients: Self::default_coefficients(),
        }
    }
}

/// Output locations. Not part of the hashed configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Primary artifact (snapshot or report).
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    /// +1 defocusing, -1 focusing, 0 linear.
    #[serde(default = "default_mu")]
    pub mu: i32,
    #[serde(default = "default_a_fraction")]
    pub a_fraction: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
    #[serde(default)]
    pub trial: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub montecarlo: MonteCarloSpec,
    #[serde(default, skip_serializing)]
    pub output: OutputSpec,
}

fn default_ensemble() -> Ensemble {
    Ensemble::Gaussian
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            seed: 0,
            dim: default_dim(),
            p: default_p(),
            mu: default_mu(),
            a_fraction: default_a_fraction(),
            ensemble: default_ensemble(),
            trial: 0,
            grid: GridSpec::default(),
            input: InputSpec::default(),
            time: TimeSpec::default(),
            norm: NormSpec::default(),
            solver: SolverSpec::default(),
            montecarlo: MonteCarloSpec::default(),
            output: OutputSpec::default(),
        }
    }

    /// Parse a TOML file, or a JSON file holding either a bare configuration
    /// or an artifact with an embedded `config` object.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parse_err = |message: String| CliError::Parse {
            path: path.display().to_string(),
            message,
        };
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    /// Hex SHA-256 of the canonical JSON serialization (outputs excluded).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    pub fn exponents(&self) -> CliResult<ExponentSet> {
        derive_exponents(self.dim, self.p, self.a_fraction).map_err(|e| CliError::config("p", e.to_string()))
    }

    pub fn grid(&self) -> CliResult<Grid> {
        let grid = match (self.grid.n, self.grid.half_width) {
            (None, None) => Grid::default_for(self.dim),
            (n, l) => {
                let default = Grid::default_for(self.dim).map_err(|e| CliError::config("dim", e.to_string()))?;
                Grid::new(self.dim, n.unwrap_or(default.n()), l.unwrap_or(default.half_width()))
            }
        };
        grid.map_err(|e| CliError::config("grid", e.to_string()))
    }

    pub fn norm_pair(&self) -> CliResult<(f64, f64)> {
        match (self.norm.q, self.norm.r) {
            (Some(q), Some(r)) => Ok((q, r)),
            (None, None) => {
                let e = self.exponents()?;
                Ok((e.q, e.r))
            }
            _ => Err(CliError::config("norm", "set both q and r, or neither")),
        }
    }

    /// Field-level validation of everything the selected experiment reads.
    pub fn validate(&self) -> CliResult<()> {
        use ExperimentKind::*;
        if !(1..=3).contains(&self.dim) {
            return Err(CliError::config("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        if !(self.a_fraction > 0.0 && self.a_fraction < 1.0) {
            return Err(CliError::config("a_fraction", "must lie in (0, 1)"));
        }
        if matches!(self.experiment, Exponents | Waveop | LinearTail) {
            self.exponents()?;
        }
        if self.experiment.needs_input() {
            self.grid()?;
            match (&self.input.profile, &self.input.field) {
                (Some(_), Some(_)) => {
                    return Err(CliError::config("input", "give either a profile or a field file, not both"))
                }
                (None, None) => return Err(CliError::config("input", "a profile or a field file is required")),
                (None, Some(path)) if !path.is_file() => {
                    return Err(CliError::config(
                        "input.field",
                        format!("file {} does not exist", path.display()),
                    ))
                }
                _ => {}
            }
        }
        let t = &self.time;
        if !(t.t0 > 0.0 && t.t0.is_finite()) {
            return Err(CliError::config("time.t0", "must be positive"));
        }
        if !(t.horizon() > t.t0) {
            return Err(CliError::config("time.t_max", "must exceed time.t0"));
        }
        match self.experiment {
            Evolve => {
                if t.t.is_none_or(|v| !(v >= 0.0 && v.is_finite())) {
                    return Err(CliError::config("time.t", "a finite time t >= 0 is required"));
                }
            }
            Stnorm => {
                self.norm_pair()?;
            }
            Waveop => {
                if !matches!(self.mu, -1..=1) {
                    return Err(CliError::config("mu", "must be +1, -1 or 0"));
                }
                if t.t0 < 1.0 {
                    return Err(CliError::config("time.t0", "the solver needs T >= 1"));
                }
                if self.solver.max_iter < 4 {
                    return Err(CliError::config("solver.max_iter", "must be at least 4"));
                }
                if !(self.solver.tol > 0.0) {
                    return Err(CliError::config("solver.tol", "must be positive"));
                }
            }
            Moments | ScalarTail | LinearTail | FlrTail => self.validate_montecarlo()?,
            _ => {}
        }
        Ok(())
    }

    fn validate_montecarlo(&self) -> CliResult<()> {
        use ExperimentKind::*;
        let mc = &self.montecarlo;
        let min = MonteCarloSpec::min_trials(self.experiment);
        match mc.trials {
            None => return Err(CliError::config("montecarlo.trials", "required")),
            Some(n) if n < min => {
                return Err(CliError::config(
                    "montecarlo.trials",
                    format!("{} needs at least {min} trials, got {n}", self.experiment.name()),
                ))
            }
            _ => {}
        }
        if matches!(self.experiment, Moments | ScalarTail) && mc.coefficients.is_empty() {
            return Err(CliError::config("montecarlo.coefficients", "must be nonempty"));
        }
        if self.experiment != Moments && mc.thresholds.is_none() {
            return Err(CliError::config("montecarlo.thresholds", "required"));
        }
        if self.experiment == ScalarTail && !matches!(mc.thresholds, Some(Thresholds::Explicit(_))) {
            return Err(CliError::config("montecarlo.thresholds", "scalar-tail needs an explicit grid"));
        }
        if self.experiment == LinearTail {
            if mc.t_grid.is_empty() || mc.t_grid.iter().any(|t| !(*t >= 1.0)) {
                return Err(CliError::config("montecarlo.t_grid", "needs values T >= 1"));
            }
            if !(mc.horizon_factor > 1.0) {
                return Err(CliError::config("montecarlo.horizon_factor", "must exceed 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_defaults() {
        let text = r#"
            experiment = "linear-tail"
            seed = 7
            ensemble = "rademacher"
            [grid]
            n = 256
            half_width = 20.0
            [input.profile]
            kind = "gaussian"
            width = 1.0
            [montecarlo]
            trials = 500
            thresholds = { pilot = { trials = 100, quantiles = [0.5, 0.75] } }
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.time.intervals, 64);
        assert_eq!(cfg.montecarlo.t_grid, vec![1.0, 4.0, 16.0]);
        cfg.validate().unwrap();
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("experiment = \"stnorm\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn field_level_messages() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Stnorm);
        cfg.input.field = Some("/nonexistent/field.bin".into());
        match cfg.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "input.field"),
            other => panic!("{other:?}"),
        }
        let mut cfg = ExperimentConfig::new(ExperimentKind::Moments);
        cfg.montecarlo.trials = Some(10);
        match cfg.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "montecarlo.trials"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outputs_do_not_change_the_hash() {
        let a = ExperimentConfig::new(ExperimentKind::Exponents);
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
