//! The acceptance suite run by `reproduce`: one function per criterion, each
//! returning named checks. Reports carry no timings, so two runs with the
//! same seed serialize to identical bytes.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use scatterlab::exponents::{strauss_exponent, validate_exponents};
use scatterlab::montecarlo::{
    flr_tail_experiment, linear_tail_experiment, moment_check, scalar_tail_check, FlrTailConfig, LinearTailConfig,
    Thresholds, PILOT_QUANTILES,
};
use scatterlab::propagator::{dispersive_decay_fit, evolve_fresnel, geometric_times};
use scatterlab::randomizer::{build_partition, Ensemble};
use scatterlab::rng::keyed_rng;
use scatterlab::spacetime::{norm_scaling_check, spacetime_norm, TimeGrid};
use scatterlab::waveop::{
    crossvalidate, picard_solve, pseudoconformal, Coupling, CrossvalConfig, SolverConfig,
};
use scatterlab::{derive_exponents, sample_profile, Field, Grid, Profile, Space};

use crate::calibration::CalibrationTable;
use crate::error::{CliError, CliResult};
use crate::run::{TOOL, VERSION};

/// Closed-form and quadrature reference values.
pub mod oracle {
    /// `||e^{it Delta} e^{-x^2}||_{L^{30/7}_t L^5_x((1, inf))}`.
    pub const STNORM_D1_P3_T1: f64 = 0.842660194386388;
    /// `||F e^{-x^2}||_{L^3}`.
    pub const FLR_GAUSSIAN_RHO3: f64 = 2.25038265199143;
    /// `erfc(sqrt 2)`: `P(|Z| >= 2)`.
    pub const GAUSSIAN_TAIL_AT_2: f64 = 0.0455002638963584;
    /// `(E|Z|^alpha)^{1/alpha} / sqrt(alpha)` for `alpha = 2, 4, 6`.
    pub const GAUSSIAN_MOMENT_RATIOS: [(f64, f64); 3] = [
        (2.0, 0.7071067811865476),
        (4.0, 0.6580370064762462),
        (6.0, 0.6411203831744433),
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    fn new(label: impl Into<String>, value: f64, bound: impl Into<String>, passed: bool) -> Self {
        Check {
            label: label.into(),
            value,
            bound: bound.into(),
            passed,
        }
    }

    fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check::new(label, value, format!("<= {limit:e}"), value <= limit)
    }

    fn at_least(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check::new(label, value, format!(">= {limit}"), value >= limit)
    }

    fn relative(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let err = (value / target - 1.0).abs();
        Check::new(label, value, format!("within {tol:e} of {target}"), err <= tol)
    }

    fn holds(label: impl Into<String>, ok: bool) -> Self {
        Check::new(label, if ok { 1.0 } else { 0.0 }, "true", ok)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failures(&self) -> Vec<String> {
        self.criteria.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

/// Criterion identity and runtime budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub budget: Duration,
}

const fn criterion(id: u8, name: &'static str, secs: u64) -> Criterion {
    Criterion {
        id,
        name,
        budget: Duration::from_secs(secs),
    }
}

pub const DETERMINISM: u8 = 11;
pub const ETA_CALIBRATION: u8 = 12;

pub const CRITERIA: [Criterion; 12] = [
    criterion(1, "exponents", 1),
    criterion(2, "dispersive-decay", 60),
    criterion(3, "stnorm", 120),
    criterion(4, "partition", 120),
    criterion(5, "large-deviation", 60),
    criterion(6, "linear-tail", 600),
    criterion(7, "picard", 600),
    criterion(8, "crossval", 120),
    criterion(9, "flr-tail", 180),
    criterion(10, "pseudoconformal", 60),
    criterion(DETERMINISM, "determinism", 3600),
    criterion(ETA_CALIBRATION, "eta-calibration", 300),
];

pub fn find(key: &str) -> Option<Criterion> {
    CRITERIA
        .iter()
        .copied()
        .find(|c| c.name == key || key.parse::<u8>() == Ok(c.id))
}

pub struct SuiteOptions {
    pub seed: u64,
    /// Criteria to run; empty means all.
    pub only: Vec<u8>,
    pub calibration: String,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        SuiteOptions {
            seed,
            only: Vec::new(),
            calibration: crate::calibration::DEFAULT_TABLE.to_string(),
        }
    }

    fn selected(&self) -> Vec<Criterion> {
        CRITERIA
            .iter()
            .copied()
            .filter(|c| self.only.is_empty() || self.only.contains(&c.id))
            .collect()
    }
}

fn evaluate(c: Criterion, opts: &SuiteOptions) -> CriterionReport {
    let result = match c.id {
        1 => exponents(opts.seed),
        2 => dispersive_decay(),
        3 => stnorm(),
        4 => partition(opts.seed),
        5 => large_deviation(opts.seed),
        6 => linear_tail(opts.seed),
        7 => picard(),
        8 => crossval(),
        9 => flr_tail(opts.seed),
        10 => pseudoconformal_limit(),
        ETA_CALIBRATION => eta_calibration(&opts.calibration),
        _ => unreachable!("criterion {}", c.id),
    };
    let (checks, error) = match result {
        Ok(checks) => (checks, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionReport {
        id: c.id,
        name: c.name.to_string(),
        passed: error.is_none() && !checks.is_empty() && checks.iter().all(|k| k.passed),
        checks,
        error,
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Run the selected criteria. The main pass uses one worker thread; the
/// determinism criterion repeats the other criteria on eight threads and
/// compares the serialized reports byte for byte. `progress` sees every
/// criterion with its wall time.
pub fn run_suite<F>(opts: &SuiteOptions, mut progress: F) -> SuiteReport
where
    F: FnMut(&CriterionReport, Duration, Duration),
{
    let selected = opts.selected();
    let determinism = selected.iter().any(|c| c.id == DETERMINISM);
    let mut work: Vec<Criterion> = selected.into_iter().filter(|c| c.id != DETERMINISM).collect();
    if work.is_empty() && determinism {
        work = CRITERIA.iter().copied().filter(|c| c.id != DETERMINISM).collect();
    }
    let single = pool(1);
    let mut criteria = Vec::new();
    for c in &work {
        let start = Instant::now();
        let report = single.install(|| evaluate(*c, opts));
        progress(&report, start.elapsed(), c.budget);
        criteria.push(report);
    }
    let mut report = SuiteReport {
        tool: TOOL,
        version: VERSION,
        seed: opts.seed,
        criteria,
    };
    if determinism {
        let start = Instant::now();
        let first = report.to_json();
        let eight = pool(8);
        let second = SuiteReport {
            criteria: work.iter().map(|c| eight.install(|| evaluate(*c, opts))).collect(),
            ..report.clone()
        }
        .to_json();
        let c = find("determinism").unwrap();
        let checks = vec![
            Check::holds("reports byte-identical (1 vs 8 threads)", first == second),
            Check::new("report bytes", first.len() as f64, "equal lengths", first.len() == second.len()),
        ];
        let det = CriterionReport {
            id: c.id,
            name: c.name.to_string(),
            passed: checks.iter().all(|k| k.passed),
            checks,
            error: None,
        };
        progress(&det, start.elapsed(), c.budget);
        report.criteria.push(det);
    }
    report
}

/// Exponent identities on random admissible `(d, p)` and the hand-derived tables.
fn exponents(seed: u64) -> CliResult<Vec<Check>> {
    let mut rng = keyed_rng(seed, 1, 0);
    let mut worst = 0.0_f64;
    let mut failed = 0usize;
    for _ in 0..1000 {
        let d = rng.random_range(1..=3usize);
        let p0 = strauss_exponent(d)?;
        let pmax = 4.0 / d as f64;
        let p = loop {
            let p = p0 + (pmax - p0) * rng.random::<f64>();
            if p > p0 && p < pmax {
                break p;
            }
        };
        let report = validate_exponents(&derive_exponents(d, p, 0.5)?);
        worst = worst.max(report.max_identity_residual());
        failed += usize::from(!report.passed);
    }
    let table = |d: usize, p: f64, expected: &[(&str, f64)]| -> CliResult<f64> {
        let e = derive_exponents(d, p, 0.5)?;
        let value = |name: &str| match name {
            "r" => e.r,
            "q" => e.q,
            "qbar" => e.qbar,
            "s_c" => e.s_c,
            "eps0" => e.eps0,
            "rho0" => e.rho0,
            "a" => e.a,
            "b" => e.b,
            "alpha" => e.alpha,
            "beta" => e.beta,
            _ => f64::NAN,
        };
        Ok(expected
            .iter()
            .map(|(name, v)| (value(name) - v).abs())
            .fold(0.0, f64::max))
    };
    let d1 = table(
        1,
        3.0,
        &[
            ("r", 5.0),
            ("q", 30.0 / 7.0),
            ("qbar", 15.0),
            ("s_c", -1.0 / 6.0),
            ("eps0", 1.0 / 15.0),
            ("rho0", 3.0),
            ("a", 20.0 / 3.0),
            ("b", 5.0),
            ("alpha", 20.0 / 17.0),
            ("beta", 5.0 / 4.0),
        ],
    )?;
    let d3 = table(
        3,
        1.2,
        &[
            ("r", 16.0 / 5.0),
            ("q", 96.0 / 35.0),
            ("qbar", 96.0 / 19.0),
            ("s_c", -1.0 / 6.0),
            ("eps0", 19.0 / 96.0),
            ("rho0", 9.0 / 4.0),
        ],
    )?;
    Ok(vec![
        Check::at_most("max identity residual over 1000 samples", worst, 1e-12),
        Check::new("samples failing validation", failed as f64, "== 0", failed == 0),
        Check::holds("p0(3) == 1 exactly", strauss_exponent(3)? == 1.0),
        Check::at_most("d=1 p=3 table deviation", d1, 1e-12),
        Check::at_most("d=3 p=1.2 table deviation", d3, 1e-12),
    ])
}

/// Decay of the sup norm of the free flow of Gaussian data and conservation of mass.
fn dispersive_decay() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for grid in [Grid::new(1, 1024, 40.0)?, Grid::new(2, 128, 16.0)?] {
        let d = grid.dim();
        let f = sample_profile(&grid, &Profile::gaussian(1.0))?;
        let times = geometric_times(10.0, 1000.0, 16);
        let fit = dispersive_decay_fit(&f, f64::INFINITY, &times)?;
        checks.push(Check::relative(
            format!("d={d} decay slope"),
            fit.slope,
            -(d as f64) / 2.0,
            0.02,
        ));
        let mass = f.l2_norm();
        let drift = times
            .iter()
            .map(|&t| Ok((evolve_fresnel(&f, t)?.field.l2_norm() / mass - 1.0).abs()))
            .collect::<CliResult<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("d={d} L2 drift"), drift, 1e-12));
    }
    Ok(checks)
}

/// The d=1 space-time norm against its oracle, and critical scaling invariance.
fn stnorm() -> CliResult<Vec<Check>> {
    let e = derive_exponents(1, 3.0, 0.5)?;
    let f = sample_profile(&Grid::new(1, 1024, 40.0)?, &Profile::gaussian(1.0))?;
    let rep = spacetime_norm(&f, e.q, e.r, &TimeGrid::default_for(1.0)?)?;
    let mut checks = vec![Check::relative(
        "L^{30/7}_t L^5_x((1,inf)) norm",
        rep.total,
        oracle::STNORM_D1_P3_T1,
        5e-3,
    )];
    let tg = TimeGrid::default_for(4.0)?;
    for lambda in [0.5, 2.0] {
        let s = norm_scaling_check(&f, lambda, e.p, e.q, e.r, &tg)?;
        checks.push(Check::relative(
            format!("scaling ratio at lambda={lambda}"),
            s.ratio,
            s.expected,
            1e-2,
        ));
    }
    Ok(checks)
}

fn partition_family(dim: usize) -> Vec<Profile> {
    let at = |c: f64| [c, 0.0, 0.0];
    vec![
        Profile::gaussian(0.5),
        Profile::gaussian(1.0),
        Profile::gaussian(2.0),
        Profile::bump(1.0),
        Profile::Bump {
            center: at(0.5),
            radius: 2.0,
            amplitude: 1.0,
        },
        Profile::ModulatedGaussian {
            center: if dim == 1 { at(1.3) } else { [1.3, -0.4, 0.0] },
            width: 1.0,
            amplitude: 1.0,
            momentum: [2.0, 1.0, 0.0],
        },
    ]
}

/// Partition of unity, split ratios and the mean square of the randomized datum.
fn partition(seed: u64) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for grid in [Grid::new(1, 256, 20.0)?, Grid::new(2, 64, 8.0)?] {
        let d = grid.dim();
        let pou = build_partition(&grid)?;
        let sum_err = (0..grid.len())
            .map(|i| (pou.partition_sum(i) - 1.0).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("d={d} max |sum psi_k - 1|"), sum_err, 1e-12));
        let floor = 5f64.powi(-(d as i32));
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for profile in partition_family(d) {
            let f = sample_profile(&grid, &profile)?;
            for ratio in [pou.l2_split_ratio(&f)?.ratio, pou.weighted_split_ratio(&f, 0.5)?.ratio] {
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        checks.push(Check::new(
            format!("d={d} split ratios"),
            lo,
            format!("[{floor}, 1], max {hi}"),
            lo >= floor && hi <= 1.0 + 1e-12,
        ));
    }
    let grid = Grid::new(1, 256, 20.0)?;
    let pou = build_partition(&grid)?;
    let f = sample_profile(&grid, &Profile::gaussian(1.5))?;
    let split = pou.l2_split_ratio(&f)?.split;
    let trials = 10_000u64;
    let samples: Vec<f64> = (0..trials)
        .map(|t| pou.randomize(&f, Ensemble::Gaussian, seed.wrapping_add(4), t).map(|g| g.mass()))
        .collect::<scatterlab::Result<_>>()?;
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    checks.push(Check::new(
        "E||f^w||^2 over 1e4 trials",
        mean,
        format!("within 3 SE ({se:.3e}) of {split}"),
        (mean - split).abs() <= 3.0 * se,
    ));
    Ok(checks)
}

/// Moments and tails of Gaussian random sums.
fn large_deviation(seed: u64) -> CliResult<Vec<Check>> {
    let c: Vec<f64> = (1..=16).map(|k| 1.0 / k as f64).collect();
    let alphas: Vec<f64> = oracle::GAUSSIAN_MOMENT_RATIOS.iter().map(|r| r.0).collect();
    let rep = moment_check(Ensemble::Gaussian, &c, &alphas, 100_000, seed.wrapping_add(5))?;
    let mut checks: Vec<Check> = rep
        .rows
        .iter()
        .zip(oracle::GAUSSIAN_MOMENT_RATIOS)
        .map(|(row, (alpha, exact))| Check::relative(format!("moment ratio alpha={alpha}"), row.ratio, exact, 0.02))
        .collect();
    let tail = scalar_tail_check(Ensemble::Gaussian, &[0.6, 0.8], &[0.0, 2.0], 100_000, seed.wrapping_add(6))?;
    let cell = &tail.cells[1];
    checks.push(Check::new(
        "P(|S| >= 2)",
        cell.p_hat,
        format!("Wilson [{:.5}, {:.5}] contains {}", cell.lo95, cell.hi95, oracle::GAUSSIAN_TAIL_AT_2),
        cell.lo95 <= oracle::GAUSSIAN_TAIL_AT_2 && oracle::GAUSSIAN_TAIL_AT_2 <= cell.hi95,
    ));
    Ok(checks)
}

fn unit_gaussian(grid: Grid) -> CliResult<Field> {
    let f = sample_profile(&grid, &Profile::gaussian(1.0))?;
    Ok(f.scaled(Complex64::new(1.0 / f.l2_norm(), 0.0)))
}

/// Exceedance surface of the randomized free flow over thresholds and `T`.
fn linear_tail(seed: u64) -> CliResult<Vec<Check>> {
    let grid = Grid::new(1, 256, 20.0)?;
    let f = unit_gaussian(grid)?;
    let pou = build_partition(&grid)?;
    let exps = derive_exponents(1, 3.0, 0.5)?;
    let cfg = LinearTailConfig {
        ensemble: Ensemble::Gaussian,
        thresholds: Thresholds::Pilot {
            trials: 500,
            quantiles: PILOT_QUANTILES.to_vec(),
        },
        t_grid: vec![1.0, 4.0, 16.0],
        horizon_factor: 1024.0,
        intervals: 65,
        trials: 2000,
        seed: seed.wrapping_add(7),
    };
    let rep = linear_tail_experiment(&f, &pou, &exps, &cfg)?;
    let fit = rep
        .fits
        .iter()
        .find(|fit| fit.abscissa == "threshold^2" && fit.fixed == Some(1.0));
    let median = rep.pilot_thresholds.as_ref().map(|t| t[0]).unwrap_or(f64::NAN);
    let at = |t: f64| rep.cell(median, Some(t)).cloned();
    let (c1, c4, c16) = (at(1.0), at(4.0), at(16.0));
    let mut checks = vec![
        Check::new(
            "T=1 slope of ln P vs eta^2",
            fit.map_or(f64::NAN, |f| f.slope),
            "< 0",
            fit.is_some_and(|f| f.slope < 0.0),
        ),
        Check::at_least("T=1 fit R^2", fit.map_or(f64::NAN, |f| f.r2), 0.9),
    ];
    match (c1, c4, c16) {
        (Some(c1), Some(c4), Some(c16)) => {
            checks.push(Check::new(
                "P at pilot median, T=1,4,16",
                c4.p_hat,
                format!("{} > {} > {}", c1.p_hat, c4.p_hat, c16.p_hat),
                c1.p_hat > c4.p_hat && c4.p_hat > c16.p_hat,
            ));
            checks.push(Check::new(
                "Wilson gap between T=1 and T=16",
                c1.lo95 - c16.hi95,
                "> 0",
                c16.hi95 < c1.lo95,
            ));
            checks.push(Check::at_least("trials per cell", c1.trials as f64, 500.0));
        }
        _ => checks.push(Check::holds("median cells present", false)),
    }
    Ok(checks)
}

struct PicardCase {
    dim: usize,
    p: f64,
    grid: Grid,
}

fn picard_cases() -> CliResult<Vec<PicardCase>> {
    Ok(vec![
        PicardCase {
            dim: 1,
            p: 3.0,
            grid: Grid::new(1, 256, 20.0)?,
        },
        PicardCase {
            dim: 2,
            p: 1.5,
            grid: Grid::new(2, 64, 8.0)?,
        },
        PicardCase {
            dim: 3,
            p: 1.2,
            grid: Grid::new(3, 32, 6.0)?,
        },
    ])
}

const PICARD_AMPLITUDE: f64 = 0.05;

fn small_data_solver(dim: usize, p: f64, coupling: Coupling) -> CliResult<SolverConfig> {
    Ok(SolverConfig::new(dim, p, coupling, 1.0)?.with_times(TimeGrid::new(1.0, 1000.0, 32)?))
}

/// Small-data Picard runs in d = 1, 2, 3.
fn picard() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for case in picard_cases()? {
        let d = case.dim;
        let cfg = small_data_solver(d, case.p, Coupling::Defocusing)?;
        let phi = sample_profile(&case.grid, &Profile::gaussian(1.0).amplified(PICARD_AMPLITUDE))?;
        let (_, rep) = picard_solve(&phi, &cfg)?;
        checks.push(Check::new(
            format!("d={d} iterations"),
            rep.iterations as f64,
            "converged within 10",
            rep.converged && rep.iterations <= 10,
        ));
        let worst = rep.ratios.iter().copied().fold(0.0, f64::max);
        checks.push(Check::new(format!("d={d} max contraction ratio"), worst, "< 1", worst < 1.0));
        checks.push(Check::at_most(format!("d={d} certificate"), rep.certificate, 2.0 * cfg.tol));
        let drop = rep.residuals[0] / rep.residuals.last().copied().unwrap_or(f64::NAN);
        checks.push(Check::at_least(format!("d={d} residual drop T to T_max"), drop, 10.0));
        let half = phi.scaled(Complex64::new(0.5, 0.0));
        let (_, rep_half) = picard_solve(&half, &cfg)?;
        let scale = match (rep.ratios.first(), rep_half.ratios.first()) {
            (Some(a), Some(b)) if *b > 0.0 => a / b,
            _ => f64::NAN,
        };
        checks.push(Check::relative(
            format!("d={d} first-ratio scaling under halving"),
            scale,
            2f64.powf(case.p),
            0.5,
        ));
    }
    Ok(checks)
}

/// Split-step forward evolution against the Picard trajectory.
fn crossval() -> CliResult<Vec<Check>> {
    let grid = Grid::new(1, 512, 20.0)?;
    let phi = sample_profile(&grid, &Profile::gaussian(1.0).amplified(PICARD_AMPLITUDE))?;
    let mut checks = Vec::new();
    for (coupling, bound) in [(Coupling::Defocusing, 1e-3), (Coupling::Disabled, 1e-8)] {
        let cfg = small_data_solver(1, 3.0, coupling)?;
        let (traj, rep) = picard_solve(&phi, &cfg)?;
        if !rep.converged {
            checks.push(Check::holds(format!("{coupling:?} Picard converged"), false));
            continue;
        }
        let xv = crossvalidate(&traj, &cfg, &CrossvalConfig::default())?;
        checks.push(Check::at_most(
            format!("{coupling:?} max relative L2 discrepancy"),
            xv.max_discrepancy,
            bound,
        ));
    }
    Ok(checks)
}

/// Fourier-Lebesgue tail law and the deterministic step at the closed-form norm.
fn flr_tail(seed: u64) -> CliResult<Vec<Check>> {
    let grid = Grid::new(1, 1024, 40.0)?;
    let f = sample_profile(&grid, &Profile::gaussian(1.0))?;
    let pou = build_partition(&grid)?;
    let random = flr_tail_experiment(
        &f.scaled(Complex64::new(1.0 / f.l2_norm(), 0.0)),
        &pou,
        &FlrTailConfig {
            ensemble: Ensemble::Gaussian,
            rho: 3.0,
            thresholds: Thresholds::Pilot {
                trials: 1000,
                quantiles: PILOT_QUANTILES.to_vec(),
            },
            trials: 2000,
            seed: seed.wrapping_add(9),
        },
    )?;
    let fit = random.fits.first();
    let v = oracle::FLR_GAUSSIAN_RHO3;
    let step = flr_tail_experiment(
        &f,
        &pou,
        &FlrTailConfig {
            ensemble: Ensemble::Deterministic,
            rho: 3.0,
            thresholds: Thresholds::Explicit(vec![v - 1e-4, v + 1e-4]),
            trials: 10,
            seed,
        },
    )?;
    let p: Vec<f64> = step.cells.iter().map(|c| c.p_hat).collect();
    Ok(vec![
        Check::new(
            "slope of ln P vs M^2",
            fit.map_or(f64::NAN, |f| f.slope),
            "< 0",
            fit.is_some_and(|f| f.slope < 0.0),
        ),
        Check::at_least("fit R^2", fit.map_or(f64::NAN, |f| f.r2), 0.9),
        Check::at_most("deterministic norm vs closed form", (step.samples[0].median - v).abs(), 1e-4),
        Check::holds("step between M = v -/+ 1e-4", p == [1.0, 0.0]),
    ])
}

/// Isometry of the pseudoconformal transform and its limit for free flows.
fn pseudoconformal_limit() -> CliResult<Vec<Check>> {
    let grid = Grid::new(1, 1024, 40.0)?;
    let u_plus = sample_profile(&grid, &Profile::gaussian(1.0))?;
    let limit = u_plus
        .fourier()?
        .conj()
        .scaled(Complex64::new((2.0 * PI).powf(-0.5), 0.0));
    let mut errors = Vec::new();
    let mut isometry = 0.0_f64;
    for t in [10.0, 25.0, 50.0] {
        let u = evolve_fresnel(&u_plus, t)?.field;
        let v = pseudoconformal(&u, t, 3.0)?.field;
        isometry = isometry.max((v.l2_norm() / u.l2_norm() - 1.0).abs());
        let v = Field::new(*limit.grid(), Space::Frequency, v.into_values())?;
        errors.push(v.relative_l2_distance(&limit)?);
    }
    Ok(vec![
        Check::at_most("isometry defect", isometry, 1e-10),
        Check::at_most("distance to limit at t=50", errors[2], 0.05),
        Check::new(
            "distance decreasing over t = 10, 25, 50",
            errors[0],
            format!("{:.4} > {:.4} > {:.4}", errors[0], errors[1], errors[2]),
            errors[0] > errors[1] && errors[1] > errors[2],
        ),
    ])
}

/// Each calibrated amplitude: half of it converges, 1.5 times it fails.
fn eta_calibration(table: &str) -> CliResult<Vec<Check>> {
    let table = match CalibrationTable::parse(table) {
        Ok(t) => t,
        Err(e) => return Ok(vec![Check::new(format!("table parses: {e}"), 0.0, "true", false)]),
    };
    if table.entry.is_empty() {
        return Err(CliError::config("calibration", "table has no entries"));
    }
    let mut checks = Vec::new();
    for e in &table.entry {
        let tag = format!("d={} p={}", e.dim, e.p);
        checks.push(Check::holds(format!("{tag}: 0.5 A0 converges"), e.converges_at(0.5)?));
        checks.push(Check::holds(format!("{tag}: 1.5 A0 fails"), !e.converges_at(1.5)?));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_lookup() {
        assert_eq!(find("exponents").unwrap().id, 1);
        assert_eq!(find("7").unwrap().name, "picard");
        assert!(find("nonsense").is_none());
    }

    #[test]
    fn cheap_criteria_pass() {
        let mut opts = SuiteOptions::new(0);
        opts.only = vec![1, 10];
        let report = run_suite(&opts, |_, _, _| {});
        assert_eq!(report.criteria.len(), 2);
        assert!(report.failures().is_empty(), "{}", report.to_json());
    }

    #[test]
    fn corrupted_table_fails_calibration() {
        let mut opts = SuiteOptions::new(0);
        opts.only = vec![ETA_CALIBRATION];
        opts.calibration = "entry = 3".into();
        let report = run_suite(&opts, |_, _, _| {});
        assert!(!report.criteria[0].passed);
    }
}
