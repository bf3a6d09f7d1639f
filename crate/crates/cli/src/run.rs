//! Experiment orchestration: resolve inputs, call the core library, write artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;

use scatterlab::exponents::masaki_feasible;
use scatterlab::montecarlo::{
    flr_tail_experiment, linear_tail_experiment, moment_check, scalar_tail_check, FlrTailConfig, LinearTailConfig,
    Thresholds,
};
use scatterlab::propagator::{dispersive_decay_fit, evolve, geometric_times, DecayFit};
use scatterlab::randomizer::build_partition;
use scatterlab::snapshot::{load_snapshot, save_snapshot, Provenance};
use scatterlab::spacetime::{spacetime_norm, NormReport, TimeGrid};
use scatterlab::waveop::{
    calibrate_eta0, crossvalidate, picard_solve, Calibration, Coupling, CrossvalConfig, SolverConfig,
};
use scatterlab::{sample_profile, ExponentSet, Field, Warning};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "scatterlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON envelope written for every artifact.
#[derive(Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub result: &'a T,
}

pub fn artifact_json<T: Serialize>(cfg: &ExperimentConfig, result: &T) -> String {
    let artifact = Artifact {
        tool: TOOL,
        version: VERSION,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg,
        result,
    };
    let mut s = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Paths and optional stdout text produced by one run.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub stdout: Option<String>,
}

impl Outcome {
    fn json<T: Serialize>(&mut self, cfg: &ExperimentConfig, path: PathBuf, result: &T) -> CliResult<()> {
        write_text(&path, &artifact_json(cfg, result))?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn out_path(cfg: &ExperimentConfig, explicit: Option<&PathBuf>, default: &str) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(default),
    }
}

/// Output format of the `exponents` table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TableFormat {
    #[default]
    Json,
    Csv,
}

/// Exponent table with the published key set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentTable {
    pub d: usize,
    pub p: f64,
    pub p0: f64,
    pub r: f64,
    pub q: f64,
    pub qbar: f64,
    pub s_c: f64,
    pub eps0: f64,
    pub rho0: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub feasible_masaki: Option<bool>,
}

impl From<&ExponentSet> for ExponentTable {
    fn from(e: &ExponentSet) -> Self {
        ExponentTable {
            d: e.d,
            p: e.p,
            p0: e.p0,
            r: e.r,
            q: e.q,
            qbar: e.qbar,
            s_c: e.s_c,
            eps0: e.eps0,
            rho0: e.rho0,
            a: e.a,
            b: e.b,
            alpha: e.alpha,
            beta: e.beta,
            feasible_masaki: masaki_feasible(e).ok(),
        }
    }
}

impl ExponentTable {
    pub fn to_csv(&self) -> String {
        let m = self.feasible_masaki.map_or(String::new(), |b| b.to_string());
        format!(
            "d,p,p0,r,q,qbar,s_c,eps0,rho0,a,b,alpha,beta,feasible_masaki\n{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.d,
            self.p,
            self.p0,
            self.r,
            self.q,
            self.qbar,
            self.s_c,
            self.eps0,
            self.rho0,
            self.a,
            self.b,
            self.alpha,
            self.beta,
            m
        )
    }
}

/// Input datum: sampled profile or loaded snapshot.
pub fn load_input(cfg: &ExperimentConfig) -> CliResult<(Field, Provenance)> {
    if let Some(path) = &cfg.input.field {
        let (field, prov) = load_snapshot(path).map_err(|e| match e {
            scatterlab::Error::Io(source) => CliError::io(path, source),
            other => CliError::config("input.field", other.to_string()),
        })?;
        if field.grid().dim() != cfg.dim {
            return Err(CliError::config(
                "input.field",
                format!("snapshot has dimension {}, config says {}", field.grid().dim(), cfg.dim),
            ));
        }
        return Ok((field, prov));
    }
    let profile = cfg
        .input
        .profile
        .as_ref()
        .ok_or_else(|| CliError::config("input", "a profile or a field file is required"))?;
    let field = sample_profile(&cfg.grid()?, profile).map_err(|e| CliError::config("input.profile", e.to_string()))?;
    Ok((field, Provenance::default()))
}

fn normalized(f: &Field) -> CliResult<Field> {
    let n = f.l2_norm();
    if !(n > 0.0) {
        return Err(CliError::config("input", "datum must be nonzero"));
    }
    Ok(f.scaled(num_complex::Complex64::new(1.0 / n, 0.0)))
}

fn time_grid(cfg: &ExperimentConfig) -> CliResult<TimeGrid> {
    TimeGrid::new(cfg.time.t0, cfg.time.horizon(), cfg.time.intervals).map_err(|e| CliError::config("time", e.to_string()))
}

fn snapshot_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct EvolveResult {
    t: f64,
    backend: scatterlab::propagator::Backend,
    snapshot: String,
    mass_in: f64,
    mass_out: f64,
    frame_half_width: f64,
    warnings: Vec<Warning>,
    decay_fit: Option<DecayFit>,
}

#[derive(Serialize)]
struct RandomizeResult {
    snapshot: String,
    ensemble: scatterlab::randomizer::Ensemble,
    trial: u64,
    mass_in: f64,
    mass_out: f64,
    cells: usize,
}

#[derive(Serialize)]
struct WaveopResult {
    eta_measured: f64,
    iterations: usize,
    converged: bool,
    distances: Vec<f64>,
    ratios: Vec<f64>,
    certificate: f64,
    residual_times: Vec<f64>,
    residuals: Vec<f64>,
    crossval_discrepancy: Option<f64>,
    tail_fractions: Vec<f64>,
    tail_exponent: Option<f64>,
    norms: scatterlab::waveop::SpaceTimeNorms,
    c_measured: f64,
    warnings: Vec<String>,
}

pub fn solver_config(cfg: &ExperimentConfig) -> CliResult<SolverConfig> {
    let coupling = Coupling::from_mu(cfg.mu).map_err(|e| CliError::config("mu", e.to_string()))?;
    let mut solver = SolverConfig::new(cfg.dim, cfg.p, coupling, cfg.time.t0)
        .map_err(|e| CliError::config("p", e.to_string()))?
        .with_times(time_grid(cfg)?)
        .with_max_iter(cfg.solver.max_iter);
    solver.exponents = cfg.exponents()?;
    solver.tol = cfg.solver.tol;
    Ok(solver)
}

/// Run one experiment and write its artifacts.
pub fn run(cfg: &ExperimentConfig, format: TableFormat) -> CliResult<Outcome> {
    cfg.validate()?;
    let mut outcome = Outcome::default();
    match cfg.experiment {
        ExperimentKind::Exponents => {
            let table = ExponentTable::from(&cfg.exponents()?);
            outcome.stdout = Some(match format {
                TableFormat::Json => serde_json::to_string_pretty(&table).expect("table serializes") + "\n",
                TableFormat::Csv => table.to_csv(),
            });
            if let Some(path) = &cfg.output.out {
                outcome.json(cfg, path.clone(), &table)?;
            }
        }
        ExperimentKind::Evolve => {
            let (f, _) = load_input(cfg)?;
            let t = cfg.time.t.expect("validated");
            let evolved = evolve(&f, t, cfg.time.backend)?;
            let path = out_path(cfg, cfg.output.out.as_ref(), "evolved.bin");
            let prov = Provenance {
                master_seed: cfg.seed,
                ..Provenance::default()
            };
            save_snapshot(&path, &evolved.field, &prov)?;
            outcome.artifacts.push(path.clone());
            let decay_fit = match &cfg.time.decay {
                Some(spec) => {
                    let times = geometric_times(spec.t_min, spec.t_max, spec.samples);
                    let fit = dispersive_decay_fit(&f, spec.r.unwrap_or(f64::INFINITY), &times)?;
                    let csv = out_path(cfg, cfg.output.csv.as_ref(), "decay.csv");
                    let mut text = String::from("t,norm\n");
                    for (t, n) in fit.times.iter().zip(&fit.norms) {
                        text.push_str(&format!("{t},{n}\n"));
                    }
                    write_text(&csv, &text)?;
                    outcome.artifacts.push(csv);
                    Some(fit)
                }
                None => None,
            };
            let result = EvolveResult {
                t,
                backend: cfg.time.backend,
                snapshot: path.display().to_string(),
                mass_in: f.mass(),
                mass_out: evolved.field.mass(),
                frame_half_width: evolved.field.grid().half_width(),
                warnings: evolved.warnings,
                decay_fit,
            };
            outcome.json(cfg, snapshot_sidecar(&path), &result)?;
        }
        ExperimentKind::Stnorm => {
            let (f, _) = load_input(cfg)?;
            let (q, r) = cfg.norm_pair()?;
            let report: NormReport = spacetime_norm(&f, q, r, &time_grid(cfg)?)?;
            let path = out_path(cfg, cfg.output.out.as_ref(), "stnorm.json");
            outcome.json(cfg, path, &report)?;
        }
        ExperimentKind::Randomize => {
            let (f, _) = load_input(cfg)?;
            let pou = build_partition(f.grid())?;
            let fw = pou.randomize(&f, cfg.ensemble, cfg.seed, cfg.trial)?;
            let path = out_path(cfg, cfg.output.out.as_ref(), "randomized.bin");
            let prov = Provenance {
                master_seed: cfg.seed,
                trial: cfg.trial,
                ensemble: cfg.ensemble.tag(),
            };
            save_snapshot(&path, &fw, &prov)?;
            outcome.artifacts.push(path.clone());
            let result = RandomizeResult {
                snapshot: path.display().to_string(),
                ensemble: cfg.ensemble,
                trial: cfg.trial,
                mass_in: f.mass(),
                mass_out: fw.mass(),
                cells: pou.cells().len(),
            };
            outcome.json(cfg, snapshot_sidecar(&path), &result)?;
        }
        ExperimentKind::Waveop => {
            let (phi, _) = load_input(cfg)?;
            let solver = solver_config(cfg)?;
            let path = out_path(cfg, cfg.output.out.as_ref(), "waveop.json");
            if cfg.solver.calibrate {
                let cal = calibrate(&phi, &solver)?;
                outcome.json(cfg, path, &cal)?;
                return Ok(outcome);
            }
            let (traj, report) = picard_solve(&phi, &solver)?;
            let crossval_discrepancy = if cfg.solver.crossval && report.converged && cfg.dim == 1 {
                Some(crossvalidate(&traj, &solver, &CrossvalConfig::default())?.max_discrepancy)
            } else {
                None
            };
            let result = WaveopResult {
                eta_measured: report.eta,
                iterations: report.iterations,
                converged: report.converged,
                distances: report.distances,
                ratios: report.ratios,
                certificate: report.certificate,
                residual_times: report.residual_times,
                residuals: report.residuals,
                crossval_discrepancy,
                tail_fractions: report.tail_fractions,
                tail_exponent: report.tail_exponent,
                norms: report.norms,
                c_measured: report.c_measured,
                warnings: report.warnings.iter().map(|w| w.to_string()).collect(),
            };
            outcome.json(cfg, path, &result)?;
        }
        ExperimentKind::Moments => {
            let mc = &cfg.montecarlo;
            let report = moment_check(cfg.ensemble, &mc.coefficients, &mc.alphas, mc.trials.unwrap(), cfg.seed)?;
            let path = out_path(cfg, cfg.output.out.as_ref(), "moments.json");
            outcome.json(cfg, path, &report)?;
        }
        ExperimentKind::ScalarTail | ExperimentKind::LinearTail | ExperimentKind::FlrTail => {
            let mc = &cfg.montecarlo;
            let thresholds = mc.thresholds.clone().expect("validated");
            let trials = mc.trials.unwrap();
            let report = match cfg.experiment {
                ExperimentKind::ScalarTail => {
                    let Thresholds::Explicit(grid) = &thresholds else {
                        unreachable!("validated")
                    };
                    scalar_tail_check(cfg.ensemble, &mc.coefficients, grid, trials, cfg.seed)?
                }
                ExperimentKind::LinearTail => {
                    let f = normalized(&load_input(cfg)?.0)?;
                    let pou = build_partition(f.grid())?;
                    let lt = LinearTailConfig {
                        ensemble: cfg.ensemble,
                        thresholds,
                        t_grid: mc.t_grid.clone(),
                        horizon_factor: mc.horizon_factor,
                        intervals: mc.intervals,
                        trials,
                        seed: cfg.seed,
                    };
                    linear_tail_experiment(&f, &pou, &cfg.exponents()?, &lt)?
                }
                _ => {
                    let f = normalized(&load_input(cfg)?.0)?;
                    let pou = build_partition(f.grid())?;
                    let rho = match mc.rho {
                        Some(rho) => rho,
                        None => cfg.exponents()?.rho0,
                    };
                    let ft = FlrTailConfig {
                        ensemble: cfg.ensemble,
                        rho,
                        thresholds,
                        trials,
                        seed: cfg.seed,
                    };
                    flr_tail_experiment(&f, &pou, &ft)?
                }
            };
            let path = out_path(cfg, cfg.output.out.as_ref(), &format!("{}.json", cfg.experiment.name()));
            outcome.json(cfg, path, &report)?;
            let csv = out_path(cfg, cfg.output.csv.as_ref(), &format!("{}.csv", cfg.experiment.name()));
            write_text(&csv, &report.to_csv())?;
            outcome.artifacts.push(csv);
        }
    }
    Ok(outcome)
}

/// Doubling search for a failing amplitude, then bisection for the contraction threshold.
pub fn calibrate(unit: &Field, solver: &SolverConfig) -> CliResult<Calibration> {
    let converges = |a: f64| -> CliResult<bool> {
        let phi = unit.scaled(num_complex::Complex64::new(a, 0.0));
        match picard_solve(&phi, solver) {
            Ok((_, r)) => Ok(r.converged),
            Err(e) if !e.is_config() => Ok(false),
            Err(e) => Err(e.into()),
        }
    };
    let mut lo = 1.0;
    while !converges(lo)? {
        lo *= 0.5;
        if lo < 1e-6 {
            return Err(CliError::Module(scatterlab::Error::InvalidArgument(
                "no converging amplitude above 1e-6".into(),
            )));
        }
    }
    let mut hi = 2.0 * lo;
    while converges(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(CliError::Module(scatterlab::Error::InvalidArgument(
                "no failing amplitude below 1e6".into(),
            )));
        }
    }
    Ok(calibrate_eta0(unit, solver, lo, hi, 12)?)
}
