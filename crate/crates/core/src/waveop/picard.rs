//! Picard iteration for `u = e^{it Delta} phi + i mu \int_t^inf e^{i(t-s) Delta} |u|^p u ds`.
//!
//! In profile form the map reads `w(t) = phi + i mu \int_t^inf G(s) ds` with
//! `G(s) = e^{-is Delta} (|u|^p u)(s)`. One application costs two Fresnel
//! transforms per time node. Distances are measured in `L^a_t L^b_x` on the
//! physical frames.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::duhamel::{Forcing, DUHAMEL_TAIL_WARN};
use super::{nonlinearity, SolverConfig, Trajectory};
use crate::error::{Error, Result, Warning};
use crate::exponents::ExponentSet;
use crate::grid::{Field, Space};
use crate::propagator::{evolve_fresnel, fresnel_backward};
use crate::spacetime::{combine_time_norm, dispersive_rate, spacetime_norm, TimeGrid};

/// Initial iterate of the Picard scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    /// `u_0 = e^{it Delta} phi`.
    Free,
    /// `u_0 = 0`.
    Zero,
    /// `u_0 = c e^{it Delta} phi`.
    Scaled(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeNorms {
    /// `L^q_t L^r_x` (critical pair).
    pub qr: f64,
    /// `L^a_t L^b_x` (admissible pair).
    pub ab: f64,
    /// `sup_t ||u(t)||_2`.
    pub sup_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    /// `||e^{it Delta} phi||_{L^q_t L^r_x((T, inf))}`.
    pub eta: f64,
    pub iterations: usize,
    /// `d_n = ||u_{n+1} - u_n||_{L^a_t L^b_x}`.
    pub distances: Vec<f64>,
    /// `d_{n+1} / d_n`.
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// `||u - Phi u||` for the returned iterate.
    pub certificate: f64,
    pub norms: SpaceTimeNorms,
    /// Smallest `C` with `sup L^2, L^a L^b <= 2 C ||phi||_2` and `L^q L^r <= C eta`.
    pub c_measured: f64,
    pub residual_times: Vec<f64>,
    /// `||u(t_j) - e^{it_j Delta} phi||_2`.
    pub residuals: Vec<f64>,
    /// Share of the Duhamel integral at `t = T` carried by the tail correction, per iteration.
    pub tail_fractions: Vec<f64>,
    pub tail_exponent: Option<f64>,
    pub warnings: Vec<Warning>,
}

/// Result of one application of the Picard map.
#[derive(Clone, Debug)]
pub struct MapOutput {
    pub trajectory: Trajectory,
    /// `L^r` and `L^b` norms of the input at each node.
    pub input_norms_r: Vec<f64>,
    pub input_norms_b: Vec<f64>,
    pub tail_fraction: f64,
    pub tail_exponent: Option<f64>,
}

fn check_phi(phi: &Field, cfg: &SolverConfig) -> Result<()> {
    if phi.space() != Space::Physical {
        return Err(Error::InvalidArgument("final state must be a physical-space field".into()));
    }
    if phi.grid().dim() != cfg.dim() {
        return Err(Error::GridMismatch(format!(
            "final state has dimension {}, solver {}",
            phi.grid().dim(),
            cfg.dim()
        )));
    }
    Ok(())
}

/// The pulled-back nonlinearity `G(s_j)` plus spatial norms of `u(s_j)`.
fn pulled_nonlinearity(traj: &Trajectory, cfg: &SolverConfig) -> Result<(Forcing, Vec<f64>, Vec<f64>)> {
    let p = cfg.p();
    let (r, b) = (cfg.exponents.r, cfg.exponents.b);
    let base = *traj.base();
    let rows = traj
        .profiles()
        .par_iter()
        .zip(traj.times().nodes().par_iter())
        .map(|(w, &s)| {
            let u = evolve_fresnel(w, s)?.field;
            let nr = u.lp_norm(r)?;
            let nb = u.lp_norm(b)?;
            let g = fresnel_backward(&nonlinearity(&u, p), s, &base)?;
            Ok((g, nr, nb))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pullbacks = Vec::with_capacity(rows.len());
    let mut nr = Vec::with_capacity(rows.len());
    let mut nb = Vec::with_capacity(rows.len());
    for (g, a, c) in rows {
        pullbacks.push(g);
        nr.push(a);
        nb.push(c);
    }
    Ok((Forcing::from_pullbacks(traj.times().clone(), pullbacks)?, nr, nb))
}

/// Corrections `i mu \int_t^inf G(s) ds` at every node, with the map diagnostics.
fn corrections(traj: &Trajectory, cfg: &SolverConfig) -> Result<(Vec<Field>, MapDiagnostics)> {
    let (forcing, input_norms_r, input_norms_b) = pulled_nonlinearity(traj, cfg)?;
    let (integrals, tail) = forcing.cumulative(cfg.tail)?;
    let c0 = integrals[0].l2_norm();
    let tail_fraction = if c0 > 0.0 { tail.field.l2_norm() / c0 } else { 0.0 };
    let coef = Complex64::new(0.0, cfg.coupling.mu());
    let corrections = integrals.into_par_iter().map(|c| c.scaled(coef)).collect();
    Ok((
        corrections,
        MapDiagnostics {
            input_norms_r,
            input_norms_b,
            tail_fraction,
            tail_exponent: tail.exponent,
        },
    ))
}

struct MapDiagnostics {
    input_norms_r: Vec<f64>,
    input_norms_b: Vec<f64>,
    tail_fraction: f64,
    tail_exponent: Option<f64>,
}

/// One application of the Picard map `Phi`.
pub fn apply_map(phi: &Field, traj: &Trajectory, cfg: &SolverConfig) -> Result<MapOutput> {
    let (corr, diag) = corrections(traj, cfg)?;
    let MapDiagnostics {
        input_norms_r,
        input_norms_b,
        tail_fraction,
        tail_exponent,
    } = diag;
    let profiles: Vec<Field> = corr.par_iter().map(|c| phi.add(c)).collect::<Result<_>>()?;
    if profiles.iter().any(|w| !w.is_finite()) {
        return Err(Error::BlowUp { iteration: 0 });
    }
    Ok(MapOutput {
        trajectory: Trajectory::new(traj.times().clone(), profiles)?,
        input_norms_r,
        input_norms_b,
        tail_fraction,
        tail_exponent,
    })
}

/// `||u - v||_{L^a_t L^b_x((T, inf))}` for two trajectories on the same nodes.
pub fn trajectory_distance(u: &Trajectory, v: &Trajectory, exps: &ExponentSet) -> Result<f64> {
    let b = exps.b;
    let norms = u
        .profiles()
        .par_iter()
        .zip(v.profiles().par_iter())
        .zip(u.times().nodes().par_iter())
        .map(|((x, y), &t)| {
            let diff = x.sub(y)?;
            if diff.is_zero() {
                return Ok(0.0);
            }
            evolve_fresnel(&diff, t)?.field.lp_norm(b)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(combine_time_norm(&norms, u.times(), exps.a, dispersive_rate(exps.d, b))?.total)
}

fn time_norm(values: &[f64], tg: &TimeGrid, q: f64, dim: usize, r: f64) -> Result<f64> {
    Ok(combine_time_norm(values, tg, q, dispersive_rate(dim, r))?.total)
}

pub fn picard_solve(phi: &Field, cfg: &SolverConfig) -> Result<(Trajectory, PicardReport)> {
    picard_solve_from(phi, cfg, Start::Free)
}

pub fn picard_solve_from(phi: &Field, cfg: &SolverConfig, start: Start) -> Result<(Trajectory, PicardReport)> {
    cfg.validate()?;
    check_phi(phi, cfg)?;
    let e = &cfg.exponents;
    let eta = spacetime_norm(phi, e.q, e.r, &cfg.times)?.total;
    let mut traj = match start {
        Start::Free => Trajectory::free(phi, &cfg.times),
        Start::Zero => Trajectory::free(&Field::zeros(*phi.grid(), Space::Physical), &cfg.times),
        Start::Scaled(c) => Trajectory::free(&phi.scaled(Complex64::new(c, 0.0)), &cfg.times),
    };
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut tail_fractions = Vec::new();
    let mut converged = false;
    let mut expanding = 0;
    for iteration in 0..cfg.max_iter {
        let out = apply_map(phi, &traj, cfg).map_err(|err| match err {
            Error::BlowUp { .. } => Error::BlowUp { iteration },
            other => other,
        })?;
        let d = trajectory_distance(&out.trajectory, &traj, e)?;
        if !d.is_finite() {
            return Err(Error::BlowUp { iteration });
        }
        if let Some(&prev) = distances.last() {
            let ratio = if prev > 0.0 { d / prev } else { 0.0 };
            ratios.push(ratio);
            if ratio >= 1.0 {
                expanding += 1;
                if expanding >= 3 {
                    return Err(Error::EtaTooLarge { eta, ratios });
                }
            } else {
                expanding = 0;
            }
        }
        distances.push(d);
        tail_fractions.push(out.tail_fraction);
        traj = out.trajectory;
        if d <= cfg.tol {
            converged = true;
            break;
        }
    }
    let check = apply_map(phi, &traj, cfg)?;
    let certificate = trajectory_distance(&check.trajectory, &traj, e)?;
    let qr = time_norm(&check.input_norms_r, &cfg.times, e.q, e.d, e.r)?;
    let ab = time_norm(&check.input_norms_b, &cfg.times, e.a, e.d, e.b)?;
    let sup_l2 = traj.profiles().iter().map(|w| w.l2_norm()).fold(0.0, f64::max);
    let phi_norm = phi.l2_norm();
    let c_measured = if phi_norm > 0.0 && eta > 0.0 {
        (sup_l2 / (2.0 * phi_norm)).max(ab / (2.0 * phi_norm)).max(qr / eta)
    } else {
        0.0
    };
    let residuals = traj.scattering_residual(phi)?;
    let mut warnings = Vec::new();
    if let Some(&fraction) = tail_fractions.last() {
        if fraction > DUHAMEL_TAIL_WARN {
            warnings.push(Warning::DuhamelTail { fraction });
        }
    }
    let report = PicardReport {
        eta,
        iterations: distances.len(),
        distances,
        ratios,
        converged,
        certificate,
        norms: SpaceTimeNorms { qr, ab, sup_l2 },
        c_measured,
        residual_times: cfg.times.nodes().to_vec(),
        residuals,
        tail_fractions,
        tail_exponent: check.tail_exponent,
        warnings,
    };
    Ok((traj, report))
}

/// `u_1 - u_0` for `u_0 = e^{it Delta} phi`, as profiles `i mu \int_t^inf G`.
pub fn first_correction(phi: &Field, cfg: &SolverConfig) -> Result<Vec<Field>> {
    check_phi(phi, cfg)?;
    Ok(corrections(&Trajectory::free(phi, &cfg.times), cfg)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearEstimates {
    /// `||D||_{L^q L^r} / ||u||_{L^q L^r}^{p+1}`, `D` the Duhamel term of `|u|^p u`.
    pub nle: f64,
    /// `(sup ||D||_2 + ||D||_{L^a L^b}) / (||u||_{L^q L^r}^p ||u||_{L^a L^b})`.
    pub nle2: f64,
    pub duhamel_qr: f64,
    pub duhamel_ab: f64,
    pub duhamel_sup_l2: f64,
    pub u_qr: f64,
    pub u_ab: f64,
}

/// Measure the nonlinear estimates on a trajectory.
pub fn nonlinear_estimates(traj: &Trajectory, cfg: &SolverConfig) -> Result<NonlinearEstimates> {
    let e = &cfg.exponents;
    let (forcing, nr, nb) = pulled_nonlinearity(traj, cfg)?;
    let (integrals, _) = forcing.cumulative(cfg.tail)?;
    let rows = integrals
        .par_iter()
        .zip(cfg.times.nodes().par_iter())
        .map(|(c, &t)| {
            let d = evolve_fresnel(c, t)?.field;
            Ok((d.lp_norm(e.r)?, d.lp_norm(e.b)?, c.l2_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let dr: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let db: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let duhamel_sup_l2 = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let duhamel_qr = time_norm(&dr, &cfg.times, e.q, e.d, e.r)?;
    let duhamel_ab = time_norm(&db, &cfg.times, e.a, e.d, e.b)?;
    let u_qr = time_norm(&nr, &cfg.times, e.q, e.d, e.r)?;
    let u_ab = time_norm(&nb, &cfg.times, e.a, e.d, e.b)?;
    let p = e.p;
    Ok(NonlinearEstimates {
        nle: duhamel_qr / u_qr.powf(p + 1.0),
        nle2: (duhamel_sup_l2 + duhamel_ab) / (u_qr.powf(p) * u_ab),
        duhamel_qr,
        duhamel_ab,
        duhamel_sup_l2,
        u_qr,
        u_ab,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest amplitude found to converge.
    pub amplitude: f64,
    /// Smallest amplitude found to fail.
    pub failing_amplitude: f64,
    /// `eta` at `amplitude`.
    pub eta: f64,
}

fn contracts(phi: &Field, cfg: &SolverConfig) -> Result<bool> {
    match picard_solve(phi, cfg) {
        Ok((_, report)) => Ok(report.converged),
        Err(Error::EtaTooLarge { .. }) | Err(Error::BlowUp { .. }) | Err(Error::DivergentTail { .. }) => Ok(false),
        Err(other) => Err(other),
    }
}

/// Bisection on the amplitude of `unit` for the contraction threshold, starting
/// from a converging amplitude `lo` and a failing amplitude `hi`.
pub fn calibrate_eta0(unit: &Field, cfg: &SolverConfig, lo: f64, hi: f64, steps: usize) -> Result<Calibration> {
    let scaled = |a: f64| unit.scaled(Complex64::new(a, 0.0));
    if !contracts(&scaled(lo), cfg)? {
        return Err(Error::InvalidArgument(format!("amplitude {lo} does not converge")));
    }
    if contracts(&scaled(hi), cfg)? {
        return Err(Error::InvalidArgument(format!("amplitude {hi} still converges")));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if contracts(&scaled(mid), cfg)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e = &cfg.exponents;
    let eta = spacetime_norm(&scaled(lo), e.q, e.r, &cfg.times)?.total;
    Ok(Calibration {
        amplitude: lo,
        failing_amplitude: hi,
        eta,
    })
}
