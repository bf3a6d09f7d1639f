//! Named analytic profiles and the smooth plateau bump.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Mass fraction outside the box above which a profile counts as escaping it.
pub const OUTSIDE_MASS_TOL: f64 = 1e-10;

fn origin() -> [f64; 3] {
    [0.0; 3]
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `A e^{i theta} e^{-|x-c|^2 / w^2}`.
    Gaussian {
        #[serde(default = "origin")]
        center: [f64; 3],
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Gaussian times the plane wave `e^{i k.x}`.
    ModulatedGaussian {
        #[serde(default = "origin")]
        center: [f64; 3],
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
        momentum: [f64; 3],
    },
    /// `A phi(|x-c| / R)`: equal to `A` on the ball of radius `R`, zero beyond `2R`.
    Bump {
        #[serde(default = "origin")]
        center: [f64; 3],
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Indicator of the ball of radius `R`, smoothed over a shell of width `edge`.
    SmoothedIndicator {
        #[serde(default = "origin")]
        center: [f64; 3],
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        edge: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Zero,
}

impl Profile {
    /// Unit centered Gaussian `e^{-|x|^2/w^2}`.
    pub fn gaussian(width: f64) -> Self {
        Profile::Gaussian {
            center: origin(),
            width,
            amplitude: 1.0,
            phase: 0.0,
        }
    }

    pub fn bump(radius: f64) -> Self {
        Profile::Bump {
            center: origin(),
            radius,
            amplitude: 1.0,
        }
    }

    /// Copy with the amplitude multiplied by `factor`.
    pub fn amplified(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Profile::Gaussian { amplitude, .. }
            | Profile::ModulatedGaussian { amplitude, .. }
            | Profile::Bump { amplitude, .. }
            | Profile::SmoothedIndicator { amplitude, .. } => *amplitude *= factor,
            Profile::Zero => {}
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("profile {what} must be positive")));
        match self {
            Profile::Gaussian { width, .. } | Profile::ModulatedGaussian { width, .. } if !(*width > 0.0) => {
                bad("width")
            }
            Profile::Bump { radius, .. } if !(*radius > 0.0) => bad("radius"),
            Profile::SmoothedIndicator { radius, edge, .. } if !(*radius > 0.0 && *edge > 0.0) => {
                bad("radius and edge")
            }
            _ => Ok(()),
        }
    }

    /// Value at `x`; only the first `dim` coordinates are used.
    pub fn eval(&self, x: [f64; 3], dim: usize) -> Complex64 {
        let dist2 = |c: &[f64; 3]| (0..dim).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>();
        match self {
            Profile::Gaussian {
                center,
                width,
                amplitude,
                phase,
            } => Complex64::from_polar(amplitude * (-dist2(center) / (width * width)).exp(), *phase),
            Profile::ModulatedGaussian {
                center,
                width,
                amplitude,
                momentum,
            } => {
                let kx: f64 = (0..dim).map(|i| momentum[i] * x[i]).sum();
                Complex64::from_polar(amplitude * (-dist2(center) / (width * width)).exp(), kx)
            }
            Profile::Bump {
                center,
                radius,
                amplitude,
            } => Complex64::new(amplitude * plateau_bump(dist2(center).sqrt() / radius), 0.0),
            Profile::SmoothedIndicator {
                center,
                radius,
                edge,
                amplitude,
            } => {
                let u = (radius + edge - dist2(center).sqrt()) / edge;
                Complex64::new(amplitude * smooth_step(u), 0.0)
            }
            Profile::Zero => Complex64::default(),
        }
    }

    /// Mass fraction of the continuum profile outside the box of `grid`.
    fn outside_fraction(&self, grid: &Grid) -> Result<f64> {
        let dim = grid.dim();
        let l = grid.half_width();
        match self {
            Profile::Zero => Ok(0.0),
            Profile::Gaussian { center, width, amplitude, .. }
            | Profile::ModulatedGaussian { center, width, amplitude, .. } => {
                if *amplitude == 0.0 {
                    return Ok(0.0);
                }
                // |f|^2 is a Gaussian of width w / sqrt(2) per axis
                let s = std::f64::consts::SQRT_2 / width;
                let mut log_inside = 0.0;
                for c in center.iter().take(dim) {
                    let out = 0.5 * (libm::erfc(s * (l - c)) + libm::erfc(s * (l + c)));
                    log_inside += (-out.min(1.0)).ln_1p();
                }
                Ok(-log_inside.exp_m1())
            }
            Profile::Bump { center, radius, amplitude }
            | Profile::SmoothedIndicator { center, radius, amplitude, .. } => {
                if *amplitude == 0.0 {
                    return Ok(0.0);
                }
                let reach = match self {
                    Profile::SmoothedIndicator { edge, .. } => radius + edge,
                    _ => 2.0 * radius,
                };
                let h = grid.spacing();
                if center.iter().take(dim).all(|c| c - reach >= -l && c + reach <= l - h) {
                    return Ok(0.0);
                }
                let padded = grid.padded(4)?;
                let wide = Field::from_fn(padded, |x| self.eval(x, dim));
                Ok(wide.mass_fraction_where(|x| x[..dim].iter().any(|c| *c < -l || *c > l - h)))
            }
        }
    }
}

/// Sample `profile` at the nodes of `grid`, rejecting profiles that leave the box.
pub fn sample_profile(grid: &Grid, profile: &Profile) -> Result<Field> {
    profile.validate()?;
    let outside = profile.outside_fraction(grid)?;
    if outside > OUTSIDE_MASS_TOL {
        return Err(Error::TruncationOverflow { outside });
    }
    let dim = grid.dim();
    Ok(Field::from_fn(*grid, |x| profile.eval(x, dim)))
}

fn s(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth transition: 0 for `u <= 0`, 1 for `u >= 1`.
pub(crate) fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = s(u);
        a / (a + s(1.0 - u))
    }
}

/// The plateau bump as a function of the radius: 1 on `[0, 1]`, 0 on
/// `[2, inf)`, `s(2-r) / (s(2-r) + s(r-1))` in between with `s(t) = e^{-1/t}`.
pub fn plateau_bump(r: f64) -> f64 {
    smooth_step(2.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        assert_eq!(plateau_bump(0.0), 1.0);
        assert_eq!(plateau_bump(1.0), 1.0);
        assert_eq!(plateau_bump(2.0), 0.0);
        assert_eq!(plateau_bump(3.0), 0.0);
        assert!((plateau_bump(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = plateau_bump(1.0 + i as f64 / 100.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn zero_amplitude_is_zero_field() {
        let grid = Grid::new(2, 32, 5.0).unwrap();
        let f = sample_profile(&grid, &Profile::gaussian(1.0).amplified(0.0)).unwrap();
        assert!(f.is_zero());
        assert!(sample_profile(&grid, &Profile::Zero).unwrap().is_zero());
    }

    #[test]
    fn escaping_profiles_are_rejected() {
        let grid = Grid::new(1, 512, 20.0).unwrap();
        let at_edge = Profile::Gaussian {
            center: [20.0, 0.0, 0.0],
            width: 1.0,
            amplitude: 1.0,
            phase: 0.0,
        };
        match sample_profile(&grid, &at_edge) {
            Err(Error::TruncationOverflow { outside }) => assert!((outside - 0.5).abs() < 1e-6),
            other => panic!("unexpected {other:?}"),
        }
        let bump = Profile::Bump {
            center: [19.0, 0.0, 0.0],
            radius: 1.0,
            amplitude: 1.0,
        };
        assert!(matches!(
            sample_profile(&grid, &bump),
            Err(Error::TruncationOverflow { .. })
        ));
        assert!(sample_profile(&grid, &Profile::bump(1.0)).is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let p = Profile::SmoothedIndicator {
            center: [0.0, 1.0, 0.0],
            radius: 2.0,
            edge: 0.5,
            amplitude: 0.3,
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Profile>(&s).unwrap(), p);
        let g: Profile = serde_json::from_str(r#"{"kind":"gaussian","width":2.0}"#).unwrap();
        assert_eq!(g, Profile::gaussian(2.0));
    }
}
