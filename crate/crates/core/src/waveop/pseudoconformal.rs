//! The pseudoconformal transform
//! `v(1/2t, y) = conj((2it)^{d/2} e^{-it|y|^2} u(t, 2ty))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Space};

#[derive(Clone, Debug)]
pub struct Pseudoconformal {
    pub field: Field,
    /// New time `s = 1/(2t)`.
    pub s: f64,
    /// Coefficient `s^{dp/2 - 2}` of the nonlinearity in the transformed equation.
    pub coefficient: f64,
}

fn transform(u: &Field, t: f64, inverse: bool) -> Result<Field> {
    if u.space() != Space::Physical {
        return Err(Error::InvalidArgument("pseudoconformal transform expects a physical field".into()));
    }
    let grid = *u.grid();
    let d = grid.dim() as f64;
    // forward: v on y = x / 2t; inverse: u on x = 2t y
    let (target, amp) = if inverse {
        (grid.dilated(2.0 * t), (2.0 * t).powf(-d / 2.0))
    } else {
        (grid.dilated(0.5 / t), (2.0 * t).powf(d / 2.0))
    };
    let y_grid = if inverse { grid } else { target };
    let values: Vec<Complex64> = u
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let y = y_grid.coords(i);
            let y2: f64 = y[..grid.dim()].iter().map(|c| c * c).sum();
            if inverse {
                // u = (2it)^{-d/2} e^{it|y|^2} conj(v)
                Complex64::from_polar(amp, t * y2 - PI * d / 4.0) * v.conj()
            } else {
                (Complex64::from_polar(amp, PI * d / 4.0 - t * y2) * v).conj()
            }
        })
        .collect();
    Ok(Field::from_parts(target, Space::Physical, values))
}

/// Transform `u(t)` sampled on any grid; the result lives on that grid scaled by `1/(2t)`.
pub fn pseudoconformal(u: &Field, t: f64, p: f64) -> Result<Pseudoconformal> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::OutOfDomain(format!("pseudoconformal transform needs t > 0, got {t}")));
    }
    let s = 0.5 / t;
    let d = u.grid().dim() as f64;
    Ok(Pseudoconformal {
        field: transform(u, t, false)?,
        s,
        coefficient: s.powf(d * p / 2.0 - 2.0),
    })
}

/// Recover `u(t)` with `t = 1/(2s)` from `v(s)`.
pub fn inverse_pseudoconformal(v: &Field, s: f64) -> Result<Field> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::OutOfDomain(format!("pseudoconformal time must be positive, got {s}")));
    }
    transform(v, 0.5 / s, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profile::{sample_profile, Profile};
    use crate::propagator::evolve_fresnel;

    #[test]
    fn isometry_and_inverse() {
        let grid = Grid::new(2, 64, 8.0).unwrap();
        let u = sample_profile(
            &grid,
            &Profile::ModulatedGaussian {
                center: [0.5, 0.0, 0.0],
                width: 1.0,
                amplitude: 1.0,
                momentum: [1.0, 2.0, 0.0],
            },
        )
        .unwrap();
        for t in [0.3, 2.0, 50.0] {
            let v = pseudoconformal(&u, t, 1.5).unwrap();
            assert!((v.field.l2_norm() / u.l2_norm() - 1.0).abs() < 1e-10);
            let back = inverse_pseudoconformal(&v.field, v.s).unwrap();
            assert!(back.grid().approx_eq(&grid));
            assert!(back.relative_l2_distance(&u).unwrap() < 1e-10);
        }
        assert!(matches!(pseudoconformal(&u, 0.0, 1.5), Err(Error::OutOfDomain(_))));
        assert!(pseudoconformal(&u, -1.0, 1.5).is_err());
    }

    #[test]
    fn converges_to_conjugate_transform() {
        let grid = Grid::new(1, 1024, 40.0).unwrap();
        let u_plus = sample_profile(&grid, &Profile::gaussian(1.0)).unwrap();
        // limit is (2 pi)^{-d/2} conj(u_plus^) in the e^{-ix xi} convention
        let limit = u_plus.fourier().unwrap().conj().scaled(Complex64::new((2.0 * PI).powf(-0.5), 0.0));
        let mut prev = f64::INFINITY;
        for t in [10.0, 25.0, 50.0] {
            let u = evolve_fresnel(&u_plus, t).unwrap().field;
            let v = pseudoconformal(&u, t, 3.0).unwrap().field;
            assert!(v.grid().approx_eq(limit.grid()));
            let v = Field::new(*limit.grid(), Space::Frequency, v.into_values()).unwrap();
            let err = v.relative_l2_distance(&limit).unwrap();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev <= 0.05);
    }
}
