//! Ensemble experiments: moments and tails of random sums, and exceedance
//! probabilities of the randomized free flow and of Fourier-Lebesgue norms.
//!
//! Every trial is keyed by `(master seed, trial index)`, and results are
//! collected in trial order, so reports do not depend on the thread count.
//! The same coefficients are used for every cell of a trial (common random
//! numbers), which makes monotonicity in the thresholds and in `T` hold
//! sample by sample.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{lp_norm_of, Field};
use crate::numeric::{linear_fit, stable_sum};
use crate::propagator::evolve_fresnel;
use crate::randomizer::{draw_coefficients, Ensemble, PartitionOfUnity};
use crate::spacetime::{combine_time_norm, dispersive_rate, TimeGrid};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;
/// Default pilot quantiles for threshold selection.
pub const PILOT_QUANTILES: [f64; 5] = [0.5, 0.75, 0.9, 0.95, 0.98];
/// Trial indices at and above this offset are reserved for pilot runs.
const PILOT_OFFSET: u64 = 1 << 40;
/// Pieces `psi_k f` below this fraction of `||f||_2` are dropped from the fast path.
const PIECE_CUTOFF: f64 = 1e-15;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Threshold (`eta` or `M`).
    pub threshold: f64,
    /// Lower time endpoint, for space-time experiments.
    pub t: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub p_hat: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl Cell {
    fn from_samples(samples: &[f64], threshold: f64, t: Option<f64>) -> Cell {
        let failures = samples.iter().filter(|v| **v >= threshold).count();
        let trials = samples.len();
        let (lo95, hi95) = wilson_interval(failures, trials);
        Cell {
            threshold,
            t,
            trials,
            failures,
            p_hat: failures as f64 / trials as f64,
            lo95,
            hi95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Regressor: `"threshold^2"` or `"T^(2 eps0)"`.
    pub abscissa: String,
    /// Value of the variable held fixed (T or threshold); `None` if not applicable.
    pub fixed: Option<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub cells_used: usize,
}

/// Weighted fit of `ln p_hat` against `x(cell)` on cells with at least
/// `min_failures` failures. Weights are inverse Wilson widths on the log scale.
pub fn fit_log_tail<F>(cells: &[&Cell], x: F, min_failures: usize, abscissa: &str, fixed: Option<f64>) -> Option<TailFit>
where
    F: Fn(&Cell) -> f64,
{
    let used: Vec<&&Cell> = cells
        .iter()
        .filter(|c| c.failures >= min_failures.max(1) && c.failures < c.trials)
        .collect();
    let xs: Vec<f64> = used.iter().map(|c| x(c)).collect();
    let ys: Vec<f64> = used.iter().map(|c| c.p_hat.ln()).collect();
    let ws: Vec<f64> = used
        .iter()
        .map(|c| 1.0 / (c.hi95.ln() - c.lo95.max(1e-300).ln()))
        .collect();
    let fit = linear_fit(&xs, &ys, Some(&ws))?;
    Some(TailFit {
        abscissa: abscissa.to_string(),
        fixed,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        cells_used: used.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub t: Option<f64>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

impl SampleSummary {
    fn of(samples: &[f64], t: Option<f64>) -> SampleSummary {
        let sorted = sorted(samples);
        SampleSummary {
            t,
            min: sorted[0],
            median: quantile(&sorted, 0.5),
            max: *sorted.last().unwrap(),
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// Empirical quantile by linear interpolation of the order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub experiment: String,
    pub ensemble: Ensemble,
    pub master_seed: u64,
    pub cells: Vec<Cell>,
    pub fits: Vec<TailFit>,
    /// Thresholds derived from the pilot run, with the quantiles used.
    pub pilot_quantiles: Option<Vec<f64>>,
    pub pilot_thresholds: Option<Vec<f64>>,
    pub samples: Vec<SampleSummary>,
    /// Per-`T` square-function norm `|| (sum_k |e^{it Delta} psi_k f|^2)^{1/2} ||_{L^q L^r}`.
    pub square_function: Option<Vec<f64>>,
    /// Number of cutoffs retained by the recombination fast path.
    pub pieces: Option<usize>,
}

impl TailReport {
    pub fn cells_at_t(&self, t: f64) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.t == Some(t)).collect()
    }

    pub fn cell(&self, threshold: f64, t: Option<f64>) -> Option<&Cell> {
        self.cells.iter().find(|c| c.threshold == threshold && c.t == t)
    }

    /// CSV with columns `eta,T,trials,failures,p_hat,lo95,hi95`; the first column is `M` for
    /// Fourier-Lebesgue tails.
    pub fn to_csv(&self) -> String {
        let first = if self.experiment == "flr-tail" { "M" } else { "eta" };
        let mut out = format!("{first},T,trials,failures,p_hat,lo95,hi95\n");
        for c in &self.cells {
            let t = c.t.map_or(String::new(), |t| format!("{t}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.threshold, t, c.trials, c.failures, c.p_hat, c.lo95, c.hi95
            ));
        }
        out
    }
}

/// Realizations of `|sum_k c_k g_k|`, one per trial.
pub fn random_sum_samples(ensemble: Ensemble, c: &[f64], trials: usize, seed: u64) -> Vec<f64> {
    let keys: Vec<[i64; 3]> = (0..c.len() as i64).map(|k| [k, 0, 0]).collect();
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let g = draw_coefficients(ensemble, &keys, seed, trial);
            c.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().abs()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub alpha: f64,
    /// `(E |S|^alpha)^{1/alpha}`.
    pub moment: f64,
    /// `moment / (sqrt(alpha) ||c||_2)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub ensemble: Ensemble,
    pub trials: usize,
    pub c_norm: f64,
    pub rows: Vec<MomentRow>,
}

/// Empirical `L^alpha_omega` norms of `S = sum_k c_k g_k` against `sqrt(alpha) ||c||_2`.
pub fn moment_check(ensemble: Ensemble, c: &[f64], alphas: &[f64], trials: usize, seed: u64) -> Result<MomentReport> {
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(c_norm > 0.0) {
        return Err(Error::InvalidArgument("coefficient vector must be nonzero".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 2.0 && **a <= 12.0)) {
        return Err(Error::InvalidArgument(format!("moment order {a} outside [2, 12]")));
    }
    let samples = random_sum_samples(ensemble, c, trials, seed);
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let mean = stable_sum(&samples, |s| s.powf(alpha)) / trials as f64;
            let moment = mean.powf(1.0 / alpha);
            MomentRow {
                alpha,
                moment,
                ratio: moment / (alpha.sqrt() * c_norm),
            }
        })
        .collect();
    Ok(MomentReport {
        ensemble,
        trials,
        c_norm,
        rows,
    })
}

/// `P(|sum_k c_k g_k| >= eta)` on a grid of thresholds, with the fit of
/// `ln P` against `eta^2` on cells with at least 20 failures.
pub fn scalar_tail_check(ensemble: Ensemble, c: &[f64], eta_grid: &[f64], trials: usize, seed: u64) -> Result<TailReport> {
    let samples = random_sum_samples(ensemble, c, trials, seed);
    let cells: Vec<Cell> = eta_grid
        .iter()
        .map(|&eta| Cell::from_samples(&samples, eta, None))
        .collect();
    if cells.iter().all(|c| c.failures == 0) {
        return Err(Error::GridMisconfigured("no failures in any cell".into()));
    }
    let refs: Vec<&Cell> = cells.iter().collect();
    let fits = fit_log_tail(&refs, |c| c.threshold * c.threshold, 20, "threshold^2", None)
        .into_iter()
        .collect();
    Ok(TailReport {
        experiment: "scalar-tail".into(),
        ensemble,
        master_seed: seed,
        cells,
        fits,
        pilot_quantiles: None,
        pilot_thresholds: None,
        samples: vec![SampleSummary::of(&samples, None)],
        square_function: None,
        pieces: None,
    })
}

/// Thresholds: explicit, or pilot quantiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thresholds {
    Explicit(Vec<f64>),
    Pilot { trials: usize, quantiles: Vec<f64> },
}

impl Thresholds {
    fn resolve<F>(&self, pilot: F) -> Result<(Vec<f64>, Option<Vec<f64>>)>
    where
        F: Fn(usize) -> Result<Vec<f64>>,
    {
        match self {
            Thresholds::Explicit(v) => Ok((v.clone(), None)),
            Thresholds::Pilot { trials, quantiles } => {
                if *trials < 10 {
                    return Err(Error::InvalidArgument("pilot needs at least 10 trials".into()));
                }
                let s = sorted(&pilot(*trials)?);
                Ok((quantiles.iter().map(|q| quantile(&s, *q)).collect(), Some(quantiles.clone())))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTailConfig {
    pub ensemble: Ensemble,
    pub thresholds: Thresholds,
    /// Lower time endpoints `T`.
    pub t_grid: Vec<f64>,
    /// Horizon as a multiple of `T`.
    pub horizon_factor: f64,
    pub intervals: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Flows `e^{it Delta}(psi_k f)` at all distinct nodes of several time grids.
struct PieceFlows {
    /// Distinct nodes in increasing order.
    nodes: Vec<f64>,
    /// `flows[k][j]`: values of piece `k` at node `j` on that node's frame.
    flows: Vec<Vec<Vec<Complex64>>>,
    /// Cell index of each piece.
    cells: Vec<usize>,
    /// Cell volume of each node's frame.
    volumes: Vec<f64>,
}

fn distinct_nodes(grids: &[TimeGrid]) -> Vec<f64> {
    let mut all: Vec<f64> = grids.iter().flat_map(|g| g.nodes().iter().copied()).collect();
    all.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::new();
    for t in all {
        if out.last().is_none_or(|&last| (t - last).abs() > 1e-9 * t) {
            out.push(t);
        }
    }
    out
}

fn node_index(nodes: &[f64], t: f64) -> usize {
    let i = nodes.partition_point(|&s| s < t * (1.0 - 1e-9));
    debug_assert!((nodes[i] - t).abs() <= 1e-9 * t);
    i
}

impl PieceFlows {
    fn build(f: &Field, pou: &PartitionOfUnity, nodes: Vec<f64>) -> Result<Self> {
        let pieces = pou.localized_pieces(f, PIECE_CUTOFF)?;
        let flows = pieces
            .par_iter()
            .map(|(_, piece)| {
                nodes
                    .iter()
                    .map(|&t| Ok(evolve_fresnel(piece, t)?.field.into_values()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let volumes = nodes
            .iter()
            .map(|&t| crate::propagator::FresnelFrame::new(f.grid(), t).map(|fr| fr.target.cell_volume()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PieceFlows {
            nodes,
            flows,
            cells: pieces.iter().map(|p| p.0).collect(),
            volumes,
        })
    }

    /// `|| sum_k g_k flow_k(t_j) ||_r` at every distinct node.
    fn norms(&self, g: &[f64], r: f64) -> Vec<f64> {
        let len = self.flows.first().map_or(0, |f| f[0].len());
        let mut buf = vec![Complex64::default(); len];
        (0..self.nodes.len())
            .map(|j| {
                buf.iter_mut().for_each(|v| *v = Complex64::default());
                for (k, flow) in self.flows.iter().enumerate() {
                    let c = g[self.cells[k]];
                    for (b, v) in buf.iter_mut().zip(&flow[j]) {
                        *b += c * v;
                    }
                }
                lp_norm_of(&buf, self.volumes[j], r)
            })
            .collect()
    }

    /// `|| (sum_k |flow_k(t_j)|^2)^{1/2} ||_r` at every distinct node.
    fn square_function(&self, r: f64) -> Vec<f64> {
        let len = self.flows.first().map_or(0, |f| f[0].len());
        (0..self.nodes.len())
            .map(|j| {
                let vals: Vec<Complex64> = (0..len)
                    .map(|i| {
                        let s: f64 = self.flows.iter().map(|f| f[j][i].norm_sqr()).sum();
                        Complex64::new(s.sqrt(), 0.0)
                    })
                    .collect();
                lp_norm_of(&vals, self.volumes[j], r)
            })
            .collect()
    }
}

/// Exceedance surface of `||e^{it Delta} u_+^omega||_{L^q_t L^r_x((T, inf))}`
/// over thresholds and lower endpoints `T`.
pub fn linear_tail_experiment(
    u_plus: &Field,
    pou: &PartitionOfUnity,
    exps: &ExponentSet,
    cfg: &LinearTailConfig,
) -> Result<TailReport> {
    if cfg.t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty T grid".into()));
    }
    if cfg.trials < 1 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    pou.check_margin(u_plus)?;
    let (q, r) = (exps.q, exps.r);
    let rate = dispersive_rate(u_plus.grid().dim(), r);
    if q * rate <= 1.0 {
        return Err(Error::DivergentTail { product: q * rate });
    }
    let grids = cfg
        .t_grid
        .iter()
        .map(|&t| TimeGrid::new(t, cfg.horizon_factor * t, cfg.intervals))
        .collect::<Result<Vec<_>>>()?;
    let nodes = distinct_nodes(&grids);
    let index: Vec<Vec<usize>> = grids
        .iter()
        .map(|g| g.nodes().iter().map(|&t| node_index(&nodes, t)).collect())
        .collect();
    let flows = PieceFlows::build(u_plus, pou, nodes)?;
    let ncells = pou.cells().len();
    let trial_norms = |trial: u64| -> Result<Vec<f64>> {
        let g = pou.draw_coefficients(cfg.ensemble, cfg.seed, trial);
        debug_assert_eq!(g.len(), ncells);
        let all = flows.norms(&g, r);
        grids
            .iter()
            .zip(&index)
            .map(|(tg, idx)| {
                let values: Vec<f64> = idx.iter().map(|&i| all[i]).collect();
                Ok(combine_time_norm(&values, tg, q, rate)?.total)
            })
            .collect()
    };
    let (thresholds, pilot_quantiles) = cfg.thresholds.resolve(|n| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| trial_norms(PILOT_OFFSET + i).map(|v| v[0]))
            .collect()
    })?;
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(trial_norms)
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let mut samples = Vec::new();
    for (i, &t) in cfg.t_grid.iter().enumerate() {
        let s: Vec<f64> = per_trial.iter().map(|v| v[i]).collect();
        for &eta in &thresholds {
            cells.push(Cell::from_samples(&s, eta, Some(t)));
        }
        samples.push(SampleSummary::of(&s, Some(t)));
    }
    let mut fits = Vec::new();
    for &t in &cfg.t_grid {
        let at_t: Vec<&Cell> = cells.iter().filter(|c| c.t == Some(t)).collect();
        fits.extend(fit_log_tail(&at_t, |c| c.threshold * c.threshold, 5, "threshold^2", Some(t)));
    }
    if cfg.t_grid.len() >= 2 {
        let power = 2.0 * exps.eps0;
        for &eta in &thresholds {
            let at_eta: Vec<&Cell> = cells.iter().filter(|c| c.threshold == eta).collect();
            fits.extend(fit_log_tail(
                &at_eta,
                |c| c.t.unwrap().powf(power),
                5,
                "T^(2 eps0)",
                Some(eta),
            ));
        }
    }
    let sf_nodes = flows.square_function(r);
    let square_function = grids
        .iter()
        .zip(&index)
        .map(|(tg, idx)| {
            let values: Vec<f64> = idx.iter().map(|&i| sf_nodes[i]).collect();
            Ok(combine_time_norm(&values, tg, q, rate)?.total)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailReport {
        experiment: "linear-tail".into(),
        ensemble: cfg.ensemble,
        master_seed: cfg.seed,
        cells,
        fits,
        pilot_thresholds: pilot_quantiles.as_ref().map(|_| thresholds.clone()),
        pilot_quantiles,
        samples,
        square_function: Some(square_function),
        pieces: Some(flows.cells.len()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlrTailConfig {
    pub ensemble: Ensemble,
    pub rho: f64,
    pub thresholds: Thresholds,
    pub trials: usize,
    pub seed: u64,
}

/// Exceedance probabilities of `||(u_+^omega)^||_{L^rho}` with the fit of
/// `ln P` against `M^2`.
pub fn flr_tail_experiment(u_plus: &Field, pou: &PartitionOfUnity, cfg: &FlrTailConfig) -> Result<TailReport> {
    if !(cfg.rho > 2.0 && cfg.rho.is_finite()) {
        return Err(Error::InvalidExponent {
            value: cfg.rho,
            reason: "Fourier-Lebesgue exponent must lie in (2, inf)",
        });
    }
    pou.check_margin(u_plus)?;
    let pieces = pou.localized_pieces(u_plus, PIECE_CUTOFF)?;
    let transforms = pieces
        .par_iter()
        .map(|(_, p)| Ok(p.fourier()?.into_values()))
        .collect::<Result<Vec<_>>>()?;
    let cell_of: Vec<usize> = pieces.iter().map(|p| p.0).collect();
    let volume = u_plus.grid().dual().cell_volume();
    let len = u_plus.grid().len();
    let norm = |trial: u64| -> f64 {
        let g = pou.draw_coefficients(cfg.ensemble, cfg.seed, trial);
        let mut buf = vec![Complex64::default(); len];
        for (k, t) in transforms.iter().enumerate() {
            let c = g[cell_of[k]];
            for (b, v) in buf.iter_mut().zip(t) {
                *b += c * v;
            }
        }
        lp_norm_of(&buf, volume, cfg.rho)
    };
    let (thresholds, pilot_quantiles) = cfg
        .thresholds
        .resolve(|n| Ok((0..n as u64).into_par_iter().map(|i| norm(PILOT_OFFSET + i)).collect()))?;
    let samples: Vec<f64> = (0..cfg.trials as u64).into_par_iter().map(norm).collect();
    let cells: Vec<Cell> = thresholds
        .iter()
        .map(|&m| Cell::from_samples(&samples, m, None))
        .collect();
    let refs: Vec<&Cell> = cells.iter().collect();
    let fits = fit_log_tail(&refs, |c| c.threshold * c.threshold, 5, "threshold^2", None)
        .into_iter()
        .collect();
    Ok(TailReport {
        experiment: "flr-tail".into(),
        ensemble: cfg.ensemble,
        master_seed: cfg.seed,
        cells,
        fits,
        pilot_thresholds: pilot_quantiles.as_ref().map(|_| thresholds.clone()),
        pilot_quantiles,
        samples: vec![SampleSummary::of(&samples, None)],
        square_function: None,
        pieces: Some(pieces.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::derive_exponents;
    use crate::grid::Grid;
    use crate::profile::{sample_profile, Profile};
    use crate::randomizer::build_partition;

    #[test]
    fn wilson_basics() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!(lo > 0.39 && hi < 0.61);
        assert_eq!(wilson_interval(100, 100).1, 1.0);
    }

    #[test]
    fn gaussian_moments() {
        let c = [0.6, 0.8];
        let rep = moment_check(Ensemble::Gaussian, &c, &[2.0, 4.0], 100_000, 3).unwrap();
        assert!((rep.rows[0].ratio / 0.7071067811865476 - 1.0).abs() < 0.02);
        assert!((rep.rows[1].ratio / 0.65803701 - 1.0).abs() < 0.02);
        let single = moment_check(Ensemble::Rademacher, &[1.0], &[2.0, 6.0], 10_000, 1).unwrap();
        for row in &single.rows {
            assert!((row.ratio - 1.0 / row.alpha.sqrt()).abs() < 1e-15);
        }
        assert!(moment_check(Ensemble::Gaussian, &[0.0], &[2.0], 10, 0).is_err());
        assert!(moment_check(Ensemble::Gaussian, &[1.0], &[14.0], 10, 0).is_err());
    }

    #[test]
    fn scalar_tails() {
        let rep = scalar_tail_check(Ensemble::Gaussian, &[1.0], &[0.0, 1.0, 2.0, 2.5], 100_000, 7).unwrap();
        assert_eq!(rep.cells[0].p_hat, 1.0);
        let c = &rep.cells[2];
        assert!(c.lo95 <= 0.0455002638963584 && 0.0455002638963584 <= c.hi95);
        assert!(rep.fits[0].slope < 0.0 && rep.fits[0].r2 >= 0.95);
        let rad = scalar_tail_check(Ensemble::Rademacher, &[1.0], &[0.5, 1.5], 1000, 7).unwrap();
        assert_eq!(rad.cells[1].failures, 0);
        assert!(matches!(
            scalar_tail_check(Ensemble::Rademacher, &[1.0], &[1.5, 2.0], 1000, 7),
            Err(Error::GridMisconfigured(_))
        ));
    }

    fn small_linear(ensemble: Ensemble, thresholds: Thresholds) -> TailReport {
        let grid = Grid::new(1, 256, 20.0).unwrap();
        let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        let f = f.scaled(Complex64::new(1.0 / f.l2_norm(), 0.0));
        let pou = build_partition(&grid).unwrap();
        let exps = derive_exponents(1, 3.0, 0.5).unwrap();
        let cfg = LinearTailConfig {
            ensemble,
            thresholds,
            t_grid: vec![1.0, 4.0],
            horizon_factor: 1024.0,
            intervals: 65,
            trials: 200,
            seed: 5,
        };
        linear_tail_experiment(&f, &pou, &exps, &cfg).unwrap()
    }

    #[test]
    fn linear_tail_fast_path_matches_direct_evaluation() {
        let grid = Grid::new(1, 256, 20.0).unwrap();
        let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        let pou = build_partition(&grid).unwrap();
        let exps = derive_exponents(1, 3.0, 0.5).unwrap();
        let cfg = LinearTailConfig {
            ensemble: Ensemble::Gaussian,
            thresholds: Thresholds::Explicit(vec![0.0]),
            t_grid: vec![1.0],
            horizon_factor: 1024.0,
            intervals: 65,
            trials: 3,
            seed: 8,
        };
        let rep = linear_tail_experiment(&f, &pou, &exps, &cfg).unwrap();
        assert_eq!(rep.cells[0].p_hat, 1.0);
        let tg = TimeGrid::new(1.0, 1024.0, 65).unwrap();
        let mut direct = Vec::new();
        for trial in 0..3 {
            let fw = pou.randomize(&f, Ensemble::Gaussian, 8, trial).unwrap();
            direct.push(crate::spacetime::spacetime_norm(&fw, exps.q, exps.r, &tg).unwrap().total);
        }
        let s = sorted(&direct);
        assert!((rep.samples[0].min / s[0] - 1.0).abs() < 1e-10);
        assert!((rep.samples[0].max / s[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn deterministic_ensemble_gives_step() {
        let rep = small_linear(Ensemble::Deterministic, Thresholds::Explicit(vec![0.5, 0.9, 2.0]));
        let s = rep.samples[0];
        assert_eq!(s.min, s.max);
        for c in &rep.cells {
            assert!(c.p_hat == 0.0 || c.p_hat == 1.0);
        }
    }

    #[test]
    fn linear_tail_is_monotone_and_reproducible() {
        let th = Thresholds::Pilot {
            trials: 100,
            quantiles: PILOT_QUANTILES.to_vec(),
        };
        let a = small_linear(Ensemble::Gaussian, th.clone());
        let b = small_linear(Ensemble::Gaussian, th);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for (c1, c4) in a.cells_at_t(1.0).iter().zip(a.cells_at_t(4.0)) {
            assert!(c4.failures <= c1.failures);
        }
        let at1 = a.cells_at_t(1.0);
        assert!(at1.windows(2).all(|w| w[1].failures <= w[0].failures));
        assert!(a.square_function.as_ref().unwrap()[0] > 0.0);
    }

    #[test]
    fn flr_deterministic_step_location() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        let pou = build_partition(&grid).unwrap();
        let cfg = FlrTailConfig {
            ensemble: Ensemble::Deterministic,
            rho: 3.0,
            thresholds: Thresholds::Explicit(vec![0.0, 2.25, 2.26]),
            trials: 4,
            seed: 0,
        };
        let rep = flr_tail_experiment(&f, &pou, &cfg).unwrap();
        assert!((rep.samples[0].median - 2.25038265199143).abs() < 1e-4);
        let p: Vec<f64> = rep.cells.iter().map(|c| c.p_hat).collect();
        assert_eq!(p, vec![1.0, 1.0, 0.0]);
    }
}
