//! Tail integrals `\int_t^inf e^{-is Delta} F(s) ds` of a forcing sampled on
//! a geometric time grid.
//!
//! Between nodes the pulled-back forcing `G(s) = e^{-is Delta} F(s)` is
//! interpolated linearly in `log s` and integrated against `ds = e^tau dtau`
//! exactly (product rule), so forcings with constant `G` (free flows) are
//! integrated without error. Beyond the horizon `G` is continued by a power
//! law `G(T_max) (T_max / s)^beta`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::grid::{Field, Grid};
use crate::numeric::linear_fit;
use crate::propagator::{evolve_fresnel, fresnel_backward};
use crate::spacetime::TimeGrid;

/// Tail correction share above which a warning is attached.
pub const DUHAMEL_TAIL_WARN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModel {
    /// Truncate at the horizon.
    None,
    /// `||G(s)|| ~ s^{-beta}` with the given `beta > 1`.
    PowerLaw(f64),
    /// `beta` fitted to `||G(s)||_2` on the last decade of nodes.
    Fitted,
}

/// Pulled-back forcing `G(s_j)` on the base grid.
#[derive(Clone, Debug)]
pub struct Forcing {
    times: TimeGrid,
    pullbacks: Vec<Field>,
}

impl Forcing {
    pub fn from_pullbacks(times: TimeGrid, pullbacks: Vec<Field>) -> Result<Self> {
        if pullbacks.len() != times.nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "{} forcing samples for {} nodes",
                pullbacks.len(),
                times.nodes().len()
            )));
        }
        Ok(Forcing { times, pullbacks })
    }

    /// Forcing given by its physical values `F(s_j)` on the Fresnel frames of `base`.
    pub fn from_frames(times: TimeGrid, frames: &[Field], base: &Grid) -> Result<Self> {
        if frames.len() != times.nodes().len() {
            return Err(Error::InvalidArgument(format!(
                "{} forcing samples for {} nodes",
                frames.len(),
                times.nodes().len()
            )));
        }
        let pullbacks = frames
            .par_iter()
            .zip(times.nodes().par_iter())
            .map(|(f, &s)| fresnel_backward(f, s, base))
            .collect::<Result<Vec<_>>>()?;
        Ok(Forcing { times, pullbacks })
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn pullbacks(&self) -> &[Field] {
        &self.pullbacks
    }

    fn base(&self) -> Grid {
        *self.pullbacks[0].grid()
    }

    /// `\int_{T_max}^inf G(s) ds` under the tail model.
    pub fn tail(&self, model: TailModel) -> Result<TailEstimate> {
        let last = self.pullbacks.last().unwrap();
        let t_max = self.times.t_max();
        let beta = match model {
            TailModel::None => None,
            TailModel::PowerLaw(beta) => Some(beta),
            TailModel::Fitted => self.fitted_exponent(),
        };
        let Some(beta) = beta else {
            return Ok(TailEstimate {
                exponent: None,
                field: Field::zeros(*last.grid(), last.space()),
            });
        };
        if beta <= 1.0 {
            return Err(Error::DivergentTail { product: beta });
        }
        Ok(TailEstimate {
            exponent: Some(beta),
            field: last.scaled(Complex64::new(t_max / (beta - 1.0), 0.0)),
        })
    }

    /// Decay exponent of `||G(s)||_2` on the last decade; `None` if `G` vanishes there.
    pub fn fitted_exponent(&self) -> Option<f64> {
        let range = self.times.last_decade();
        let ts = &self.times.nodes()[range.clone()];
        let norms: Vec<f64> = self.pullbacks[range].iter().map(|g| g.l2_norm()).collect();
        if norms.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return None;
        }
        let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
        linear_fit(&xs, &ys, None).map(|f| -f.slope)
    }

    /// `C_j = \int_{t_j}^inf G(s) ds` at every node.
    pub fn cumulative(&self, model: TailModel) -> Result<(Vec<Field>, TailEstimate)> {
        let tail = self.tail(model)?;
        let weights = segment_weights(&self.times);
        let m = self.pullbacks.len() - 1;
        let mut out = Vec::with_capacity(m + 1);
        out.push(tail.field.clone());
        for k in (0..m).rev() {
            let (w0, w1) = weights[k];
            let mut c = out.last().unwrap().clone();
            c.axpy(Complex64::new(w0, 0.0), &self.pullbacks[k])?;
            c.axpy(Complex64::new(w1, 0.0), &self.pullbacks[k + 1])?;
            out.push(c);
        }
        out.reverse();
        Ok((out, tail))
    }

    /// `\int_t^inf G(s) ds` for any `t` in `[T, T_max]`.
    pub fn integral_from(&self, t: f64, model: TailModel) -> Result<(Field, TailEstimate)> {
        let nodes = self.times.nodes();
        let (t0, t_max) = (self.times.t0(), self.times.t_max());
        if !(t >= t0 * (1.0 - 1e-12) && t <= t_max * (1.0 + 1e-12)) {
            return Err(Error::OutOfDomain(format!(
                "Duhamel evaluation at t = {t} outside [{t0}, {t_max}]"
            )));
        }
        let t = t.clamp(t0, t_max);
        let tail = self.tail(model)?;
        let mut acc = tail.field.clone();
        let m = nodes.len() - 1;
        let k = nodes.partition_point(|&s| s <= t).saturating_sub(1).min(m - 1);
        let weights = segment_weights(&self.times);
        for j in (k + 1..m).rev() {
            let (w0, w1) = weights[j];
            acc.axpy(Complex64::new(w0, 0.0), &self.pullbacks[j])?;
            acc.axpy(Complex64::new(w1, 0.0), &self.pullbacks[j + 1])?;
        }
        let (w0, w1) = partial_weights(nodes[k], nodes[k + 1], t);
        acc.axpy(Complex64::new(w0, 0.0), &self.pullbacks[k])?;
        acc.axpy(Complex64::new(w1, 0.0), &self.pullbacks[k + 1])?;
        debug_assert!(acc.grid().approx_eq(&self.base()));
        Ok((acc, tail))
    }
}

#[derive(Clone, Debug)]
pub struct TailEstimate {
    pub exponent: Option<f64>,
    /// `\int_{T_max}^inf G(s) ds` on the base grid.
    pub field: Field,
}

/// Product-rule weights `(I_0, I_1)` per segment `[s_k, s_{k+1}]`:
/// `\int G ds ~ I_0 G(s_k) + I_1 G(s_{k+1})` for `G` linear in `log s`.
pub fn segment_weights(tg: &TimeGrid) -> Vec<(f64, f64)> {
    tg.nodes()
        .windows(2)
        .map(|w| partial_weights(w[0], w[1], w[0]))
        .collect()
}

/// Weights for `\int_t^{s_1}` with `s_0 <= t <= s_1`.
fn partial_weights(s0: f64, s1: f64, t: f64) -> (f64, f64) {
    let delta = (s1 / s0).ln();
    let a = (t / s0).ln();
    let e = delta.exp();
    let ea = a.exp();
    let w1 = s0 * (e * (delta - 1.0) - ea * (a - 1.0)) / delta;
    let w0 = s0 * (e - ea) - w1;
    (w0, w1)
}

#[derive(Clone, Debug)]
pub struct DuhamelValue {
    /// `\int_t^inf e^{i(t-s) Delta} F(s) ds` on the Fresnel frame of `t`.
    pub field: Field,
    /// `||tail|| / ||result||`.
    pub tail_fraction: f64,
    pub tail_exponent: Option<f64>,
    pub warnings: Vec<Warning>,
}

/// The Duhamel tail integral at time `t`.
pub fn duhamel(forcing: &Forcing, t: f64, model: TailModel) -> Result<DuhamelValue> {
    let (integral, tail) = forcing.integral_from(t, model)?;
    let norm = integral.l2_norm();
    let tail_fraction = if norm > 0.0 { tail.field.l2_norm() / norm } else { 0.0 };
    let mut warnings = Vec::new();
    if tail_fraction > DUHAMEL_TAIL_WARN {
        warnings.push(Warning::DuhamelTail { fraction: tail_fraction });
    }
    let evolved = evolve_fresnel(&integral, t)?;
    warnings.extend(evolved.warnings);
    Ok(DuhamelValue {
        field: evolved.field,
        tail_fraction,
        tail_exponent: tail.exponent,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Space;
    use crate::profile::{sample_profile, Profile};

    fn setup() -> (Grid, TimeGrid, Field) {
        let grid = Grid::new(1, 256, 20.0).unwrap();
        let tg = TimeGrid::new(1.0, 100.0, 32).unwrap();
        let g = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        (grid, tg, g)
    }

    #[test]
    fn weights_integrate_constants_and_log_linear() {
        let tg = TimeGrid::new(1.0, 1000.0, 20).unwrap();
        let w = segment_weights(&tg);
        let total: f64 = w.iter().map(|(a, b)| a + b).sum();
        assert!((total - 999.0).abs() < 1e-9);
        // G = ln s is linear in tau: \int_1^1000 ln s ds = 1000 ln 1000 - 999
        let nodes = tg.nodes();
        let approx: f64 = w
            .iter()
            .enumerate()
            .map(|(k, (a, b))| a * nodes[k].ln() + b * nodes[k + 1].ln())
            .sum();
        let exact = 1000.0 * 1000f64.ln() - 999.0;
        assert!((approx / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing() {
        let (grid, tg, _) = setup();
        let zeros = vec![Field::zeros(grid, Space::Physical); tg.nodes().len()];
        let forcing = Forcing::from_pullbacks(tg, zeros).unwrap();
        let v = duhamel(&forcing, 3.0, TailModel::Fitted).unwrap();
        assert!(v.field.is_zero());
    }

    #[test]
    fn free_flow_forcing_collapses() {
        let (grid, tg, g) = setup();
        let frames: Vec<Field> = tg
            .nodes()
            .iter()
            .map(|&s| evolve_fresnel(&g, s).unwrap().field)
            .collect();
        let forcing = Forcing::from_frames(tg.clone(), &frames, &grid).unwrap();
        for t in [1.0, 2.5, 37.0, 100.0] {
            let v = duhamel(&forcing, t, TailModel::None).unwrap();
            let expected = evolve_fresnel(&g, t).unwrap().field.scaled(Complex64::new(100.0 - t, 0.0));
            let err = v.field.relative_l2_distance(&expected).unwrap();
            assert!(err < 1e-3 || (t == 100.0 && v.field.l2_norm() < 1e-12), "t = {t}: {err}");
        }
    }

    #[test]
    fn linearity() {
        let (grid, tg, g) = setup();
        let h = sample_profile(&grid, &Profile::bump(1.5)).unwrap();
        let make = |f: &Field, c: f64| -> Vec<Field> {
            tg.nodes()
                .iter()
                .map(|s| f.scaled(Complex64::new(c * s.powf(-1.7), 0.3 * s)))
                .collect()
        };
        let a = Forcing::from_pullbacks(tg.clone(), make(&g, 1.0)).unwrap();
        let b = Forcing::from_pullbacks(tg.clone(), make(&h, 2.0)).unwrap();
        let sum: Vec<Field> = a
            .pullbacks()
            .iter()
            .zip(b.pullbacks())
            .map(|(x, y)| x.add(y).unwrap())
            .collect();
        let ab = Forcing::from_pullbacks(tg.clone(), sum).unwrap();
        let model = TailModel::PowerLaw(1.7);
        let lhs = duhamel(&ab, 4.0, model).unwrap().field;
        let rhs = duhamel(&a, 4.0, model).unwrap().field.add(&duhamel(&b, 4.0, model).unwrap().field).unwrap();
        assert!(lhs.relative_l2_distance(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn tail_of_power_law() {
        let (_, tg, g) = setup();
        // G(s) = s^{-2} g: \int_t^inf = g / t
        let pullbacks: Vec<Field> = tg.nodes().iter().map(|s| g.scaled((s.powi(-2)).into())).collect();
        let forcing = Forcing::from_pullbacks(tg.clone(), pullbacks).unwrap();
        assert!((forcing.fitted_exponent().unwrap() - 2.0).abs() < 1e-10);
        let (c, tail) = forcing.cumulative(TailModel::Fitted).unwrap();
        assert!((tail.field.l2_norm() / g.l2_norm() - 0.01).abs() < 1e-12);
        for (j, s) in tg.nodes().iter().enumerate() {
            let rel = c[j].l2_norm() / (g.l2_norm() / s);
            assert!((rel - 1.0).abs() < 1e-2, "s = {s}: {rel}");
        }
        let (at_node, _) = forcing.integral_from(tg.nodes()[5], TailModel::Fitted).unwrap();
        assert!(at_node.relative_l2_distance(&c[5]).unwrap() < 1e-12);
        assert!(matches!(
            forcing.tail(TailModel::PowerLaw(0.8)),
            Err(Error::DivergentTail { .. })
        ));
        assert!(forcing.integral_from(0.5, TailModel::None).is_err());
    }
}
