use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scatterlab::montecarlo::{Thresholds, PILOT_QUANTILES};
use scatterlab::propagator::Backend;
use scatterlab::randomizer::Ensemble;
use scatterlab::Profile;
use scatterlab_cli::config::DecaySpec;
use scatterlab_cli::run::{run, write_text, TableFormat};
use scatterlab_cli::suite::{self, SuiteOptions};
use scatterlab_cli::{CliError, CliResult, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "scatterlab", version, about = "Randomized final states and wave operators for mass-subcritical NLS")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for artifacts without an explicit path.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exponent table for (d, p).
    Exponents(ExponentsArgs),
    /// Free evolution of a datum, optionally with a dispersive decay fit.
    Evolve(EvolveArgs),
    /// Space-time norm of the free flow over (T, inf).
    Stnorm(StnormArgs),
    /// Randomize a datum over the unit-lattice partition of unity.
    Randomize(RandomizeArgs),
    /// Picard construction of the solution scattering to a final state.
    Waveop(WaveopArgs),
    /// Ensemble experiments.
    Montecarlo(MonteCarloArgs),
    /// Run the acceptance suite.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Default)]
struct Common {
    /// TOML config, or a JSON artifact whose embedded config is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args, Default)]
struct InputArgs {
    /// Field snapshot.
    #[arg(long = "in", alias = "final-state")]
    input: Option<PathBuf>,
    /// Profile such as `gaussian`, `gaussian:width=2,amplitude=0.1` or `bump:radius=1`.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    half_width: Option<f64>,
}

#[derive(Args)]
struct ExponentsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    a_fraction: Option<f64>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Also write a JSON artifact.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Periodic,
    Fresnel,
    Auto,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Fit the decay of the L^r norm (sup norm by default) over [10, 1000].
    #[arg(long)]
    decay_fit: bool,
    #[arg(long, requires = "decay_fit")]
    r: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TimeArgs {
    #[arg(long = "T")]
    t0: Option<f64>,
    #[arg(long = "Tmax")]
    t_max: Option<f64>,
    #[arg(long)]
    intervals: Option<usize>,
}

#[derive(Args)]
struct StnormArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    time: TimeArgs,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Print the report to stdout as well.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Gaussian,
    Rademacher,
    Uniform,
    Deterministic,
}

impl From<EnsembleArg> for Ensemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::Gaussian => Ensemble::Gaussian,
            EnsembleArg::Rademacher => Ensemble::Rademacher,
            EnsembleArg::Uniform => Ensemble::Uniform,
            EnsembleArg::Deterministic => Ensemble::Deterministic,
        }
    }
}

#[derive(Args)]
struct RandomizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleArg>,
    #[arg(long)]
    trial: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WaveopArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    time: TimeArgs,
    /// +1 defocusing, -1 focusing, 0 linear.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<i32>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    no_crossval: bool,
    /// Bisect the amplitude for the contraction threshold.
    #[arg(long)]
    calibrate: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum McKind {
    LinearTail,
    FlrTail,
    Moments,
    ScalarTail,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(value_enum)]
    kind: McKind,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleArg>,
    #[arg(long)]
    trials: Option<usize>,
    /// Explicit thresholds (comma separated); otherwise pilot quantiles.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Pilot trial count when thresholds are not given.
    #[arg(long)]
    pilot: Option<usize>,
    #[arg(long = "T-grid", value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Criteria to run, by name or number (repeatable).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Calibration table to check instead of the built-in one.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Report path (default: <out-dir>/reproduce.json).
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Parse `kind[:key=value,...]` into a profile.
fn parse_profile(spec: &str) -> CliResult<Profile> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut text = format!("kind = \"{}\"\n", kind.trim().replace('-', "_"));
    for pair in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::config("profile", format!("expected key=value, got `{pair}`")))?;
        text.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    toml::from_str(&text).map_err(|e| CliError::config("profile", e.to_string()))
}

fn base(kind: ExperimentKind, common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(CliError::config(
                    "experiment",
                    format!("config is for `{}`, command is `{}`", cfg.experiment.name(), kind.name()),
                ));
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(d) = common.dim {
        cfg.dim = d;
    }
    if let Some(p) = common.p {
        cfg.p = p;
    }
    Ok(cfg)
}

fn apply_input(cfg: &mut ExperimentConfig, input: &InputArgs) -> CliResult<()> {
    if let Some(path) = &input.input {
        cfg.input.field = Some(path.clone());
        cfg.input.profile = None;
    }
    if let Some(spec) = &input.profile {
        cfg.input.profile = Some(parse_profile(spec)?);
        cfg.input.field = None;
    }
    if input.n.is_some() {
        cfg.grid.n = input.n;
    }
    if input.half_width.is_some() {
        cfg.grid.half_width = input.half_width;
    }
    Ok(())
}

fn apply_time(cfg: &mut ExperimentConfig, time: &TimeArgs) {
    if let Some(t0) = time.t0 {
        cfg.time.t0 = t0;
    }
    if time.t_max.is_some() {
        cfg.time.t_max = time.t_max;
    }
    if let Some(m) = time.intervals {
        cfg.time.intervals = m;
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut format = TableFormat::Json;
    let mut echo = false;
    let mut cfg = match &cli.command {
        Command::Exponents(a) => {
            let mut cfg = base(ExperimentKind::Exponents, &a.common)?;
            if let Some(f) = a.a_fraction {
                cfg.a_fraction = f;
            }
            if a.csv {
                format = TableFormat::Csv;
            }
            cfg.output.out = a.out.clone();
            cfg
        }
        Command::Evolve(a) => {
            let mut cfg = base(ExperimentKind::Evolve, &a.common)?;
            apply_input(&mut cfg, &a.input)?;
            if a.t.is_some() {
                cfg.time.t = a.t;
            }
            if let Some(b) = a.backend {
                cfg.time.backend = match b {
                    BackendArg::Periodic => Backend::Periodic,
                    BackendArg::Fresnel => Backend::Fresnel,
                    BackendArg::Auto => Backend::Auto,
                };
            }
            if a.decay_fit {
                cfg.time.decay = Some(DecaySpec {
                    r: a.r,
                    ..DecaySpec::default()
                });
            }
            cfg.output.out = a.out.clone();
            cfg.output.csv = a.csv.clone();
            cfg
        }
        Command::Stnorm(a) => {
            let mut cfg = base(ExperimentKind::Stnorm, &a.common)?;
            apply_input(&mut cfg, &a.input)?;
            apply_time(&mut cfg, &a.time);
            if a.q.is_some() || a.r.is_some() {
                cfg.norm.q = a.q;
                cfg.norm.r = a.r;
            }
            echo = a.json;
            cfg.output.out = a.out.clone();
            cfg
        }
        Command::Randomize(a) => {
            let mut cfg = base(ExperimentKind::Randomize, &a.common)?;
            apply_input(&mut cfg, &a.input)?;
            if let Some(e) = a.ensemble {
                cfg.ensemble = e.into();
            }
            if let Some(t) = a.trial {
                cfg.trial = t;
            }
            cfg.output.out = a.out.clone();
            cfg
        }
        Command::Waveop(a) => {
            let mut cfg = base(ExperimentKind::Waveop, &a.common)?;
            apply_input(&mut cfg, &a.input)?;
            apply_time(&mut cfg, &a.time);
            if let Some(mu) = a.mu {
                cfg.mu = mu;
            }
            if let Some(m) = a.max_iter {
                cfg.solver.max_iter = m;
            }
            if let Some(tol) = a.tol {
                cfg.solver.tol = tol;
            }
            if a.no_crossval {
                cfg.solver.crossval = false;
            }
            cfg.solver.calibrate |= a.calibrate;
            cfg.output.out = a.report.clone();
            cfg
        }
        Command::Montecarlo(a) => {
            let kind = match a.kind {
                McKind::LinearTail => ExperimentKind::LinearTail,
                McKind::FlrTail => ExperimentKind::FlrTail,
                McKind::Moments => ExperimentKind::Moments,
                McKind::ScalarTail => ExperimentKind::ScalarTail,
            };
            let mut cfg = base(kind, &a.common)?;
            apply_input(&mut cfg, &a.input)?;
            if let Some(e) = a.ensemble {
                cfg.ensemble = e.into();
            }
            if a.trials.is_some() {
                cfg.montecarlo.trials = a.trials;
            }
            if let Some(t) = &a.thresholds {
                cfg.montecarlo.thresholds = Some(Thresholds::Explicit(t.clone()));
            } else if let Some(n) = a.pilot {
                cfg.montecarlo.thresholds = Some(Thresholds::Pilot {
                    trials: n,
                    quantiles: PILOT_QUANTILES.to_vec(),
                });
            }
            if let Some(t) = &a.t_grid {
                cfg.montecarlo.t_grid = t.clone();
            }
            if a.rho.is_some() {
                cfg.montecarlo.rho = a.rho;
            }
            cfg.output.out = a.out.clone();
            cfg.output.csv = a.csv.clone();
            cfg
        }
        Command::Reproduce(a) => return reproduce(&cli, a),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out_dir.is_some() {
        cfg.output.dir = cli.out_dir.clone();
    }
    let outcome = run(&cfg, format)?;
    if let Some(text) = &outcome.stdout {
        print!("{text}");
    }
    if echo {
        if let Some(path) = outcome.artifacts.first() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            print!("{text}");
        }
    }
    for path in &outcome.artifacts {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn reproduce(cli: &Cli, a: &ReproduceArgs) -> CliResult<()> {
    let mut opts = SuiteOptions::new(cli.seed.unwrap_or(0));
    for key in &a.only {
        let c = suite::find(key).ok_or_else(|| CliError::config("only", format!("unknown criterion `{key}`")))?;
        opts.only.push(c.id);
    }
    if let Some(path) = &a.calibration {
        opts.calibration = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    }
    println!("{:<4} {:<18} {:<6} {:>9} {:>8}", "id", "criterion", "result", "seconds", "budget");
    let report = suite::run_suite(&opts, |c, elapsed, budget| {
        let within = elapsed <= budget;
        let verdict = if c.passed && within { "PASS" } else { "FAIL" };
        println!(
            "{:<4} {:<18} {:<6} {:>9.2} {:>8}",
            c.id,
            c.name,
            verdict,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for check in c.checks.iter().filter(|k| !k.passed) {
            println!("       failed: {} = {} (expected {})", check.label, check.value, check.bound);
        }
        if let Some(e) = &c.error {
            println!("       error: {e}");
        }
    });
    let path = a
        .report
        .clone()
        .unwrap_or_else(|| cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join("reproduce.json"));
    write_text(&path, &report.to_json())?;
    eprintln!("wrote {}", path.display());
    let failures = report.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
