//! The free Schrodinger group `e^{it Delta}`.
//!
//! Two discretizations are provided. The periodic backend multiplies the
//! discrete transform by `e^{-it|xi|^2}` and is exact on the torus, so it is
//! only trustworthy while the solution stays inside the box. The Fresnel
//! backend uses the factorization
//!
//! `e^{it Delta} f(x) = (4 pi i t)^{-d/2} e^{i|x|^2/4t} [e^{i|y|^2/4t} f]^(x / 2t)`,
//!
//! one transform per time, with the output living on the dual grid dilated by
//! `2t`. For box-supported data it has no wraparound at any `t > 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::fft::{fft_nd, Direction};
use crate::grid::{apply_separable, Field, Grid, Space};
use crate::numeric::{linear_fit, LinearFit};

/// Boundary shell (fraction of the half-width) watched by the periodic backend.
pub const WRAP_SHELL: f64 = 0.1;
/// Shell mass fraction above which wraparound is reported.
pub const WRAP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Periodic,
    Fresnel,
    /// Fresnel for every `t > 0`, identity at `t = 0`.
    #[default]
    Auto,
}

/// Output frame of a Fresnel evaluation: the source grid's dual dilated by `2t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FresnelFrame {
    pub t: f64,
    pub dilation: f64,
    pub source: Grid,
    pub target: Grid,
}

impl FresnelFrame {
    pub fn new(source: &Grid, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Err(Error::SingularTime);
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::OutOfDomain(format!(
                "Fresnel evaluation needs t > 0, got {t}"
            )));
        }
        Ok(FresnelFrame {
            t,
            dilation: 2.0 * t,
            source: *source,
            target: source.dual().dilated(2.0 * t),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Evolved {
    pub field: Field,
    pub warnings: Vec<Warning>,
    pub frame: Option<FresnelFrame>,
}

/// Smallest time at which the Fresnel chirp is resolved with a factor-two
/// margin: the phase step `L h / 2t` between edge nodes stays below `pi / 2`.
pub fn t_min(grid: &Grid) -> f64 {
    grid.half_width() * grid.spacing() / PI
}

fn require_physical(f: &Field) -> Result<()> {
    if f.space() != Space::Physical {
        return Err(Error::InvalidArgument(
            "propagator expects a physical-space field".into(),
        ));
    }
    Ok(())
}

/// `e^{it Delta} f` on the torus of the grid.
pub fn evolve_periodic(f: &Field, t: f64) -> Result<Evolved> {
    require_physical(f)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite time {t}")));
    }
    let field = if t == 0.0 {
        f.clone()
    } else {
        let mut fh = f.fourier()?;
        let dual = *fh.grid();
        let table: Vec<Complex64> = dual
            .nodes()
            .iter()
            .map(|xi| Complex64::from_polar(1.0, -t * xi * xi))
            .collect();
        apply_separable(fh.values_mut(), &dual, &table);
        fh.inverse_fourier()?
    };
    let mut warnings = Vec::new();
    let fraction = field.boundary_mass_fraction(WRAP_SHELL);
    if fraction > WRAP_TOL {
        warnings.push(Warning::WraparoundContamination { fraction });
    }
    Ok(Evolved {
        field,
        warnings,
        frame: None,
    })
}

fn fresnel_warnings(grid: &Grid, t: f64) -> Vec<Warning> {
    let tm = t_min(grid);
    let h = grid.spacing();
    if t < tm || h * h / (4.0 * t) >= PI / 4.0 {
        vec![Warning::FresnelUnderResolved { t, t_min: tm }]
    } else {
        Vec::new()
    }
}

/// Per-axis factor of `(4 pi i t)^{-d/2}`.
fn axis_constant(t: f64) -> Complex64 {
    Complex64::from_polar((4.0 * PI * t).powf(-0.5), -PI / 4.0)
}

/// `e^{it Delta} f` for `t > 0` on the Fresnel frame.
pub fn evolve_fresnel(f: &Field, t: f64) -> Result<Evolved> {
    require_physical(f)?;
    let frame = FresnelFrame::new(f.grid(), t)?;
    let grid = *f.grid();
    let h = grid.spacing();
    let pre: Vec<Complex64> = (0..grid.n())
        .map(|j| {
            let y = grid.node(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::from_polar(sign, y * y / (4.0 * t))
        })
        .collect();
    let dual = grid.dual();
    let c = axis_constant(t) * h;
    let post: Vec<Complex64> = (0..dual.n())
        .map(|m| {
            let xi = dual.node(m);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            // |x|^2 / 4t with x = 2t xi
            c * Complex64::from_polar(sign, t * xi * xi)
        })
        .collect();
    let mut values = f.values().to_vec();
    apply_separable(&mut values, &grid, &pre);
    fft_nd(&mut values, grid.n(), grid.dim(), Direction::Forward);
    apply_separable(&mut values, &dual, &post);
    Ok(Evolved {
        field: Field::from_parts(frame.target, Space::Physical, values),
        warnings: fresnel_warnings(&grid, t),
        frame: Some(frame),
    })
}

/// Exact inverse of [`evolve_fresnel`]: maps a field on the frame of time
/// `t` back to the source grid `base`, i.e. applies `e^{-it Delta}`.
pub fn fresnel_backward(u: &Field, t: f64, base: &Grid) -> Result<Field> {
    require_physical(u)?;
    let frame = FresnelFrame::new(base, t)?;
    if !frame.target.approx_eq(u.grid()) {
        return Err(Error::GridMismatch(format!(
            "field grid {:?} is not the Fresnel frame {:?} of time {t}",
            u.grid(),
            frame.target
        )));
    }
    let dual = base.dual();
    let c = axis_constant(t).inv();
    let pre: Vec<Complex64> = (0..dual.n())
        .map(|m| {
            let xi = dual.node(m);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            c * Complex64::from_polar(sign, -t * xi * xi)
        })
        .collect();
    let scale = 1.0 / (base.n() as f64 * base.spacing());
    let post: Vec<Complex64> = (0..base.n())
        .map(|j| {
            let y = base.node(j);
            let sign = if j % 2 == 0 { scale } else { -scale };
            Complex64::from_polar(sign, -y * y / (4.0 * t))
        })
        .collect();
    let mut values = u.values().to_vec();
    apply_separable(&mut values, &dual, &pre);
    fft_nd(&mut values, base.n(), base.dim(), Direction::Inverse);
    apply_separable(&mut values, base, &post);
    Ok(Field::from_parts(*base, Space::Physical, values))
}

/// Dispatch on the backend.
pub fn evolve(f: &Field, t: f64, backend: Backend) -> Result<Evolved> {
    match backend {
        Backend::Periodic => evolve_periodic(f, t),
        Backend::Fresnel => evolve_fresnel(f, t),
        Backend::Auto if t == 0.0 => evolve_periodic(f, 0.0),
        Backend::Auto => evolve_fresnel(f, t),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Least-squares slope of `log ||e^{it Delta} f||_r` against `log t` (Fresnel backend).
pub fn dispersive_decay_fit(f: &Field, r: f64, times: &[f64]) -> Result<DecayFit> {
    if r.is_nan() || r < 2.0 {
        return Err(Error::InvalidExponent {
            value: r,
            reason: "decay fit needs r in [2, inf]",
        });
    }
    if times.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "decay fit needs at least 8 times, got {}",
            times.len()
        )));
    }
    let norms = times
        .iter()
        .map(|&t| evolve_fresnel(f, t).and_then(|e| e.field.lp_norm(r)))
        .collect::<Result<Vec<f64>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&norms)
        .filter(|(_, n)| n.is_finite() && **n > 0.0)
        .map(|(t, n)| (t.ln(), n.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::FitFailure(format!(
            "only {} usable points in the decay fit",
            xs.len()
        )));
    }
    let LinearFit {
        slope,
        intercept,
        residual,
        ..
    } = linear_fit(&xs, &ys, None)
        .ok_or_else(|| Error::FitFailure("degenerate time abscissa".into()))?;
    Ok(DecayFit {
        slope,
        intercept,
        residual,
        times: times.to_vec(),
        norms,
    })
}

/// `n` geometrically spaced times from `t0` to `t1` inclusive.
pub fn geometric_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let ratio = (t1 / t0).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { t1 } else { t0 * (ratio * i as f64).exp() })
        .collect()
}

/// Fresnel evaluations at several times, in order.
pub fn evolve_many(f: &Field, times: &[f64]) -> Result<Vec<Field>> {
    times
        .par_iter()
        .map(|&t| evolve_fresnel(f, t).map(|e| e.field))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{sample_profile, Profile};

    fn unit_gaussian(grid: Grid) -> Field {
        sample_profile(&grid, &Profile::gaussian(1.0)).unwrap()
    }

    /// `(1 + 4it)^{-1/2} e^{-x^2 / (1 + 4it)}` per axis.
    fn exact_gaussian(x: f64, t: f64) -> Complex64 {
        let z = Complex64::new(1.0, 4.0 * t);
        z.sqrt().inv() * (-(x * x) / z).exp()
    }

    #[test]
    fn periodic_identity_and_unitarity() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let f = unit_gaussian(grid);
        let e = evolve_periodic(&f, 0.0).unwrap();
        assert_eq!(e.field, f);
        for t in [0.3, 1.0, 2.0] {
            let e = evolve_periodic(&f, t).unwrap();
            assert!((e.field.mass() / f.mass() - 1.0).abs() < 1e-12);
            assert!(e.warnings.is_empty());
        }
    }

    #[test]
    fn periodic_matches_closed_form() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let u = evolve_periodic(&unit_gaussian(grid), 1.0).unwrap().field;
        let peak = u.lp_norm(f64::INFINITY).unwrap();
        assert!((peak - 17f64.powf(-0.25)).abs() < 1e-8);
        for j in (0..1024).step_by(17) {
            let x = grid.node(j);
            assert!((u.values()[j] - exact_gaussian(x, 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn periodic_reports_wraparound() {
        let grid = Grid::new(1, 256, 10.0).unwrap();
        let e = evolve_periodic(&unit_gaussian(grid), 20.0).unwrap();
        assert!(matches!(
            e.warnings.as_slice(),
            [Warning::WraparoundContamination { .. }]
        ));
    }

    #[test]
    fn group_law_periodic() {
        let grid = Grid::new(2, 128, 20.0).unwrap();
        let f = sample_profile(
            &grid,
            &Profile::ModulatedGaussian {
                center: [1.0, -0.5, 0.0],
                width: 1.0,
                amplitude: 1.0,
                momentum: [0.5, 0.0, 0.0],
            },
        )
        .unwrap();
        let a = evolve_periodic(&evolve_periodic(&f, 0.7).unwrap().field, 1.1).unwrap().field;
        let b = evolve_periodic(&f, 1.8).unwrap().field;
        assert!(a.relative_l2_distance(&b).unwrap() < 1e-10);
    }

    #[test]
    fn fresnel_matches_closed_form_at_large_time() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let f = unit_gaussian(grid);
        let e = evolve_fresnel(&f, 10.0).unwrap();
        assert!(e.warnings.is_empty());
        let frame = e.frame.unwrap();
        assert!((frame.target.half_width() - 1024.0 * PI * 10.0 / 40.0).abs() < 1e-9);
        let peak = e.field.lp_norm(f64::INFINITY).unwrap();
        assert!((peak - 1601f64.powf(-0.25)).abs() < 1e-6);
        assert!((e.field.mass() / f.mass() - 1.0).abs() < 1e-12);
        for m in (0..1024).step_by(31) {
            let x = frame.target.node(m);
            assert!((e.field.values()[m] - exact_gaussian(x, 10.0)).norm() < 1e-10, "m = {m}");
        }
    }

    #[test]
    fn fresnel_agrees_with_periodic_at_unit_time() {
        for grid in [Grid::new(1, 1024, 40.0).unwrap(), Grid::new(2, 256, 20.0).unwrap()] {
            let f = sample_profile(
                &grid,
                &Profile::ModulatedGaussian {
                    center: [0.5, 0.0, 0.0],
                    width: 1.5,
                    amplitude: 1.0,
                    momentum: [2.0, 1.0, 0.0],
                },
            )
            .unwrap();
            let periodic = evolve_periodic(&f, 1.0).unwrap().field;
            let fresnel = evolve_fresnel(&f, 1.0).unwrap().field;
            let common = fresnel.resample(&grid).unwrap();
            let d = common.relative_l2_distance(&periodic).unwrap();
            assert!(d < 1e-6, "{d}");
        }
    }

    #[test]
    fn fresnel_errors_and_inverse() {
        let grid = Grid::new(2, 64, 8.0).unwrap();
        let f = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        assert!(matches!(evolve_fresnel(&f, 0.0), Err(Error::SingularTime)));
        assert!(evolve_fresnel(&f, -1.0).is_err());
        let e = evolve_fresnel(&f, 0.01).unwrap();
        assert!(matches!(e.warnings.as_slice(), [Warning::FresnelUnderResolved { .. }]));
        for t in [0.5, 3.0, 100.0] {
            let u = evolve_fresnel(&f, t).unwrap().field;
            let back = fresnel_backward(&u, t, &grid).unwrap();
            assert!(back.relative_l2_distance(&f).unwrap() < 1e-12);
        }
        let u = evolve_fresnel(&f, 3.0).unwrap().field;
        assert!(matches!(fresnel_backward(&u, 4.0, &grid), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn dispersive_constant() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let f = unit_gaussian(grid);
        let l1 = f.lp_norm(1.0).unwrap();
        for t in geometric_times(5.0, 500.0, 6) {
            let sup = evolve_fresnel(&f, t).unwrap().field.lp_norm(f64::INFINITY).unwrap();
            let c = sup * t.sqrt() / l1;
            assert!((c / (4.0 * PI).powf(-0.5) - 1.0).abs() < 0.1, "t = {t}: {c}");
        }
    }

    #[test]
    fn decay_slopes() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let f = unit_gaussian(grid);
        let times = geometric_times(10.0, 1000.0, 12);
        let sup = dispersive_decay_fit(&f, f64::INFINITY, &times).unwrap();
        assert!((sup.slope + 0.5).abs() < 0.01);
        let two = dispersive_decay_fit(&f, 2.0, &times).unwrap();
        assert!(two.slope.abs() < 1e-10);
        let five = dispersive_decay_fit(&f, 5.0, &times).unwrap();
        assert!((five.slope + 0.3).abs() < 0.01);
        assert!(dispersive_decay_fit(&f, 1.5, &times).is_err());
        assert!(dispersive_decay_fit(&f, 4.0, &times[..5]).is_err());
        let zero = Field::zeros(grid, Space::Physical);
        assert!(matches!(
            dispersive_decay_fit(&zero, 4.0, &times),
            Err(Error::FitFailure(_))
        ));
    }
}
