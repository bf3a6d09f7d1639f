//! Space-time norms `||e^{it Delta} f||_{L^q_t L^r_x((T, inf))}`.
//!
//! The time integral over `(T, T_max)` uses the trapezoid rule in `log t` on
//! geometric nodes. The remainder `(T_max, inf)` is extrapolated from the
//! known decay law `A t^{-sigma}`, `sigma = d/2 - d/r`, with the amplitude
//! fitted on the last decade of nodes and integrated in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::grid::Field;
use crate::numeric::linear_fit;
use crate::propagator::evolve_fresnel;

/// Tail share of the q-th power above which the horizon is reported as too short.
pub const TAIL_WARN: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// `m + 1` geometric nodes from `t0 >= 1` to `t_max`, `m >= 16`.
    pub fn new(t0: f64, t_max: f64, m: usize) -> Result<Self> {
        if !(t0 >= 1.0 && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("time grid needs T >= 1, got {t0}")));
        }
        Self::with_origin(t0, t_max, m)
    }

    /// Same as [`TimeGrid::new`] without the `T >= 1` restriction (any `T > 0`).
    pub fn with_origin(t0: f64, t_max: f64, m: usize) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(Error::InvalidArgument(format!("time grid needs T > 0, got {t0}")));
        }
        if !(t_max > t0 && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon {t_max} must exceed T = {t0}"
            )));
        }
        if m < 16 {
            return Err(Error::InvalidArgument(format!("time grid needs M >= 16, got {m}")));
        }
        let step = (t_max / t0).ln() / m as f64;
        let nodes: Vec<f64> = (0..=m)
            .map(|j| if j == m { t_max } else { t0 * (step * j as f64).exp() })
            .collect();
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let w = t * step;
                if j == 0 || j == m {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        Ok(TimeGrid { nodes, weights })
    }

    /// Horizon `1000 T` with 64 intervals.
    pub fn default_for(t0: f64) -> Result<Self> {
        TimeGrid::new(t0, 1e3 * t0, 64)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights for `\int dt` in the log variable.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Uniform step in `log t`.
    pub fn log_step(&self) -> f64 {
        (self.t_max() / self.t0()).ln() / self.intervals() as f64
    }

    /// Indices of nodes in the last decade `[T_max / 10, T_max]` (at least three).
    pub fn last_decade(&self) -> std::ops::Range<usize> {
        let cut = self.t_max() / 10.0;
        let first = self.nodes.iter().position(|&t| t >= cut * (1.0 - 1e-12)).unwrap();
        let first = first.min(self.nodes.len().saturating_sub(3));
        first..self.nodes.len()
    }

    /// The grid with every node multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> TimeGrid {
        TimeGrid {
            nodes: self.nodes.iter().map(|t| t * factor).collect(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `(\int_T^{T_max} |v|^q dt)^{1/q}`.
    pub finite_part: f64,
    /// Extrapolated `(\int_{T_max}^inf |v|^q dt)^{1/q}`.
    pub tail_part: f64,
    pub total: f64,
    /// Tail share of `total^q`.
    pub tail_fraction: f64,
    /// Free log-log slope on the last decade (diagnostic); `None` for vanishing data.
    pub fit_slope: Option<f64>,
    /// Decay rate assumed for the tail.
    pub decay_rate: f64,
    /// Per-node spatial norms.
    pub node_values: Vec<f64>,
    pub warnings: Vec<Warning>,
}

/// Combine per-node spatial norms into the `L^q_t((T, inf))` norm, assuming
/// `values ~ A t^{-decay_rate}` beyond the horizon. `q = inf` takes the maximum.
pub fn combine_time_norm(values: &[f64], tg: &TimeGrid, q: f64, decay_rate: f64) -> Result<NormReport> {
    if values.len() != tg.nodes.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values for {} time nodes",
            values.len(),
            tg.nodes.len()
        )));
    }
    if q.is_nan() || q <= 1.0 {
        return Err(Error::InvalidExponent {
            value: q,
            reason: "time exponent must exceed 1",
        });
    }
    let decade = tg.last_decade();
    let ts = &tg.nodes[decade.clone()];
    let vs = &values[decade];
    let positive = vs.iter().all(|v| *v > 0.0 && v.is_finite());
    let fit_slope = if positive {
        let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
        linear_fit(&xs, &ys, None).map(|f| f.slope)
    } else {
        None
    };
    if q.is_infinite() {
        let total = values.iter().copied().fold(0.0, f64::max);
        return Ok(NormReport {
            finite_part: total,
            tail_part: 0.0,
            total,
            tail_fraction: 0.0,
            fit_slope,
            decay_rate,
            node_values: values.to_vec(),
            warnings: Vec::new(),
        });
    }
    let product = q * decay_rate;
    if product <= 1.0 {
        return Err(Error::DivergentTail { product });
    }
    let finite_q: f64 = values
        .iter()
        .zip(&tg.weights)
        .map(|(v, w)| w * v.powf(q))
        .sum();
    let tail_q = if positive {
        // amplitude of A t^{-sigma} by least squares in log space with the slope fixed
        let log_a = ts
            .iter()
            .zip(vs)
            .map(|(t, v)| v.ln() + decay_rate * t.ln())
            .sum::<f64>()
            / ts.len() as f64;
        (q * log_a + (1.0 - product) * tg.t_max().ln()).exp() / (product - 1.0)
    } else {
        0.0
    };
    let total_q = finite_q + tail_q;
    let tail_fraction = if total_q > 0.0 { tail_q / total_q } else { 0.0 };
    let mut warnings = Vec::new();
    if tail_fraction > TAIL_WARN {
        warnings.push(Warning::HorizonTooShort { tail_fraction });
    }
    Ok(NormReport {
        finite_part: finite_q.powf(1.0 / q),
        tail_part: tail_q.powf(1.0 / q),
        total: total_q.powf(1.0 / q),
        tail_fraction,
        fit_slope,
        decay_rate,
        node_values: values.to_vec(),
        warnings,
    })
}

/// Spatial `L^r` norms of the free flow at every node (Fresnel backend).
pub fn free_norm_series(f: &Field, r: f64, tg: &TimeGrid) -> Result<Vec<f64>> {
    tg.nodes
        .par_iter()
        .map(|&t| evolve_fresnel(f, t)?.field.lp_norm(r))
        .collect()
}

/// Decay rate `d/2 - d/r` of the dispersive estimate.
pub fn dispersive_rate(dim: usize, r: f64) -> f64 {
    let d = dim as f64;
    d / 2.0 - d / r
}

/// `||e^{it Delta} f||_{L^q_t L^r_x((T, inf))}` for `q in (1, inf]`, `r in [2, inf]`.
pub fn spacetime_norm(f: &Field, q: f64, r: f64, tg: &TimeGrid) -> Result<NormReport> {
    if r.is_nan() || r < 2.0 {
        return Err(Error::InvalidExponent {
            value: r,
            reason: "space exponent must lie in [2, inf]",
        });
    }
    if q.is_nan() || q <= 1.0 {
        return Err(Error::InvalidExponent {
            value: q,
            reason: "time exponent must exceed 1",
        });
    }
    let rate = dispersive_rate(f.grid().dim(), r);
    if q.is_finite() && q * rate <= 1.0 {
        return Err(Error::DivergentTail { product: q * rate });
    }
    let values = free_norm_series(f, r, tg)?;
    combine_time_norm(&values, tg, q, rate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub lambda: f64,
    /// Measured rescaled-to-original ratio.
    pub ratio: f64,
    /// `lambda^{s(q,r) - s_c}`: 1 for the critical pair.
    pub expected: f64,
    pub original: NormReport,
    pub rescaled: NormReport,
}

/// Compare the norm of the flow of `lambda^{2/p} f(lambda x)` over
/// `(T / lambda^2, inf)` with the norm of the flow of `f` over `(T, inf)`.
/// The rescaled time grid must still start at or after 1.
pub fn norm_scaling_check(
    f: &Field,
    lambda: f64,
    p: f64,
    q: f64,
    r: f64,
    tg: &TimeGrid,
) -> Result<ScalingCheck> {
    let scaled_grid = tg.scaled(lambda.powi(-2));
    if scaled_grid.t0() < 1.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "rescaled time grid starts at {} < 1; use T >= lambda^2",
            scaled_grid.t0()
        )));
    }
    let g = f.rescale(lambda, p)?;
    let original = spacetime_norm(f, q, r, tg)?;
    let rescaled = spacetime_norm(&g, q, r, &scaled_grid)?;
    let d = f.grid().dim() as f64;
    let expected = lambda.powf(2.0 / p - d / r - 2.0 / q);
    let ratio = if original.total > 0.0 {
        rescaled.total / original.total
    } else {
        1.0
    };
    Ok(ScalingCheck {
        lambda,
        ratio,
        expected,
        original,
        rescaled,
    })
}
