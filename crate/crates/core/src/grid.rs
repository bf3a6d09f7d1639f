//! Uniform isotropic grids on truncated boxes and complex fields sampled on
//! them.
//!
//! A grid of side `n` and half-width `L` has nodes `x_j = -L + j h`,
//! `h = 2L/n`, so `x = 0` is node `n/2`. The Fourier transform is fixed as
//! `f^(xi) = \int f(x) e^{-i x.xi} dx`, discretized by the rectangle rule onto
//! the dual grid with nodes `xi_m = (m - n/2) pi / L`; the inverse carries
//! `(2 pi)^{-d}`. Frequency-space fields live on the dual grid, which is
//! itself a [`Grid`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_nd, Direction};
use crate::numeric::{stable_max, stable_sum};

/// Relative tolerance used when comparing grids built through different
/// arithmetic routes (dilations, duals).
const GRID_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Grid { dim, n, half_width })
    }

    /// Default experiment resolution: (40, 1024), (20, 256), (10, 64) for d = 1, 2, 3.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            1 => Grid::new(1, 1024, 40.0),
            2 => Grid::new(2, 256, 20.0),
            3 => Grid::new(3, 64, 10.0),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node `j` along any axis.
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Per-axis lattice indices of a flat index; unused axes are zero.
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.node(idx[axis]);
        }
        x
    }

    /// The frequency grid paired with this grid by the discrete transform.
    /// Taking the dual twice returns the original grid.
    pub fn dual(&self) -> Grid {
        Grid {
            dim: self.dim,
            n: self.n,
            half_width: self.n as f64 * PI / (2.0 * self.half_width),
        }
    }

    /// Same resolution with every coordinate multiplied by `factor > 0`.
    pub fn dilated(&self, factor: f64) -> Grid {
        Grid {
            dim: self.dim,
            n: self.n,
            half_width: self.half_width * factor,
        }
    }

    /// Same spacing, box enlarged by an integer power-of-two factor.
    pub fn padded(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "padding factor must be a power of two, got {factor}"
            )));
        }
        Grid::new(self.dim, self.n * factor, self.half_width * factor as f64)
    }

    pub fn approx_eq(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && (self.half_width - other.half_width).abs() <= GRID_TOL * self.half_width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Frequency,
}

/// Complex samples on a [`Grid`] in row-major lattice order.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    space: Space,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Field { grid, space, values })
    }

    /// Construction without the finiteness scan, for internal kernels.
    pub(crate) fn from_parts(grid: Grid, space: Space, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, space, values }
    }

    pub fn zeros(grid: Grid, space: Space) -> Self {
        Field {
            grid,
            space,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    /// Pointwise samples of `f(x)` at every node.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> Complex64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.coords(i)))
            .collect();
        Field::from_parts(grid, Space::Physical, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// `\int |f|^2` by the rectangle rule.
    pub fn mass(&self) -> f64 {
        stable_sum(&self.values, |v| v.norm_sqr()) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `(sum |f|^r h^d)^{1/r}`, or the max-norm for `r = inf`.
    pub fn lp_norm(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 1.0 {
            return Err(Error::InvalidExponent {
                value: r,
                reason: "Lebesgue exponent must be >= 1",
            });
        }
        Ok(lp_norm_of(&self.values, self.grid.cell_volume(), r))
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.space != other.space || !self.grid.approx_eq(&other.grid) {
            return Err(Error::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.grid, self.space, other.grid, other.space
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field::from_parts(self.grid, self.space, values))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Field::from_parts(self.grid, self.space, values))
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Field) -> Result<()> {
        self.check_same(other)?;
        self.values
            .par_iter_mut()
            .zip(other.values.par_iter())
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        let values = self.values.par_iter().map(|v| v * c).collect();
        Field::from_parts(self.grid, self.space, values)
    }

    pub fn conj(&self) -> Field {
        let values = self.values.par_iter().map(|v| v.conj()).collect();
        Field::from_parts(self.grid, self.space, values)
    }

    /// Relative L2 distance `||self - other|| / ||other||` (absolute if `other` vanishes).
    pub fn relative_l2_distance(&self, other: &Field) -> Result<f64> {
        let diff = self.sub(other)?.l2_norm();
        let base = other.l2_norm();
        Ok(if base > 0.0 { diff / base } else { diff })
    }

    /// Forward transform onto the dual grid.
    pub fn fourier(&self) -> Result<Field> {
        if self.space != Space::Physical {
            return Err(Error::InvalidArgument(
                "forward transform expects a physical-space field".into(),
            ));
        }
        let grid = self.grid;
        let mut values = self.values.clone();
        let sign = checkerboard(grid.n, Complex64::new(1.0, 0.0));
        apply_separable(&mut values, &grid, &sign);
        fft_nd(&mut values, grid.n, grid.dim, Direction::Forward);
        let post = checkerboard(grid.n, Complex64::new(grid.spacing(), 0.0));
        apply_separable(&mut values, &grid, &post);
        Ok(Field::from_parts(grid.dual(), Space::Frequency, values))
    }

    /// Inverse transform back to the physical grid whose dual this is.
    pub fn inverse_fourier(&self) -> Result<Field> {
        if self.space != Space::Frequency {
            return Err(Error::InvalidArgument(
                "inverse transform expects a frequency-space field".into(),
            ));
        }
        let dual = self.grid;
        let physical = dual.dual();
        let mut values = self.values.clone();
        let sign = checkerboard(dual.n, Complex64::new(1.0, 0.0));
        apply_separable(&mut values, &dual, &sign);
        fft_nd(&mut values, dual.n, dual.dim, Direction::Inverse);
        // (dxi / 2 pi) per axis = 1 / (n h)
        let scale = 1.0 / (physical.n as f64 * physical.spacing());
        let post = checkerboard(dual.n, Complex64::new(scale, 0.0));
        apply_separable(&mut values, &dual, &post);
        Ok(Field::from_parts(physical, Space::Physical, values))
    }

    /// Mass fraction at nodes satisfying `pred(coords)`.
    pub fn mass_fraction_where<P>(&self, pred: P) -> f64
    where
        P: Fn([f64; 3]) -> bool + Sync,
    {
        let total = stable_sum(&self.values, |v| v.norm_sqr());
        if total == 0.0 {
            return 0.0;
        }
        let grid = self.grid;
        let indexed: Vec<(usize, &Complex64)> = self.values.iter().enumerate().collect();
        let part = stable_sum(&indexed, |(i, v)| {
            if pred(grid.coords(*i)) {
                v.norm_sqr()
            } else {
                0.0
            }
        });
        part / total
    }

    /// Mass fraction in the outer shell `max_i |x_i| >= (1 - shell) L`.
    pub fn boundary_mass_fraction(&self, shell: f64) -> f64 {
        let edge = (1.0 - shell) * self.grid.half_width;
        let dim = self.grid.dim;
        self.mass_fraction_where(|x| x[..dim].iter().any(|c| c.abs() >= edge))
    }

    /// Zero-pad to a box `factor` times larger with the same spacing.
    pub fn padded(&self, factor: usize) -> Result<Field> {
        let grid = self.grid.padded(factor)?;
        let n = self.grid.n;
        let big = grid.n;
        let shift = (big - n) / 2;
        let mut values = vec![Complex64::default(); grid.len()];
        for (i, v) in self.values.iter().enumerate() {
            let idx = self.grid.unflatten(i);
            let flat = (0..grid.dim).fold(0usize, |acc, a| acc * big + idx[a] + shift);
            values[flat] = *v;
        }
        Ok(Field::from_parts(grid, self.space, values))
    }

    /// Trigonometric interpolation of this field onto the nodes of `target`.
    /// Target nodes outside the source box receive zero.
    pub fn resample(&self, target: &Grid) -> Result<Field> {
        if self.grid.dim != target.dim {
            return Err(Error::GridMismatch("dimension differs".into()));
        }
        let coords = target.nodes();
        let values = interpolate_separable(self, &coords);
        Ok(Field::from_parts(*target, self.space, values))
    }

    /// `x -> lambda^{2/p} f(lambda x)` on the same grid.
    pub fn rescale(&self, lambda: f64, p: f64) -> Result<Field> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {lambda}")));
        }
        if !(p > 0.0) {
            return Err(Error::InvalidArgument(format!("power must be positive, got {p}")));
        }
        let amp = lambda.powf(2.0 / p);
        if lambda == 1.0 {
            return Ok(self.scaled(Complex64::new(amp, 0.0)));
        }
        if lambda < 1.0 {
            let reach = lambda * self.grid.half_width;
            let dim = self.grid.dim;
            let outside = self.mass_fraction_where(|x| x[..dim].iter().any(|c| c.abs() > reach));
            if outside > crate::profile::OUTSIDE_MASS_TOL {
                return Err(Error::TruncationOverflow { outside });
            }
        }
        let coords: Vec<f64> = self.grid.nodes().iter().map(|x| lambda * x).collect();
        let mut values = interpolate_separable(self, &coords);
        values.par_iter_mut().for_each(|v| *v *= amp);
        Ok(Field::from_parts(self.grid, self.space, values))
    }
}

pub(crate) fn lp_norm_of(values: &[Complex64], cell: f64, r: f64) -> f64 {
    if r.is_infinite() {
        return stable_max(values, |v| v.norm());
    }
    if r == 2.0 {
        return (stable_sum(values, |v| v.norm_sqr()) * cell).sqrt();
    }
    let half = r / 2.0;
    (stable_sum(values, |v| v.norm_sqr().powf(half)) * cell).powf(1.0 / r)
}

/// Per-axis table `scale * (-1)^j`.
fn checkerboard(n: usize, scale: Complex64) -> Vec<Complex64> {
    (0..n)
        .map(|j| if j % 2 == 0 { scale } else { -scale })
        .collect()
}

/// Multiply the sample at lattice index `(i0, .., i_{d-1})` by
/// `table[i0] * .. * table[i_{d-1}]`.
pub(crate) fn apply_separable(values: &mut [Complex64], grid: &Grid, table: &[Complex64]) {
    let n = grid.n;
    match grid.dim {
        1 => values
            .par_iter_mut()
            .zip(table.par_iter())
            .for_each(|(v, t)| *v *= t),
        2 => values.par_chunks_mut(n).enumerate().for_each(|(i0, row)| {
            let a = table[i0];
            for (v, t) in row.iter_mut().zip(table.iter()) {
                *v *= a * t;
            }
        }),
        _ => values
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(i0, plane)| {
                let a = table[i0];
                for (i1, row) in plane.chunks_mut(n).enumerate() {
                    let ab = a * table[i1];
                    for (v, t) in row.iter_mut().zip(table.iter()) {
                        *v *= ab * t;
                    }
                }
            }),
    }
}

/// Interpolation matrix (`targets.len() x n`) evaluating the trigonometric
/// interpolant of samples on `grid` at the given coordinates.
fn interpolation_matrix(grid: &Grid, targets: &[f64]) -> Vec<Complex64> {
    let n = grid.n;
    let dxi = PI / grid.half_width;
    let lo = -grid.half_width;
    let hi = grid.half_width;
    let nodes = grid.nodes();
    let mut m = vec![Complex64::default(); targets.len() * n];
    m.par_chunks_mut(n).zip(targets.par_iter()).for_each(|(row, &y)| {
        if y < lo || y >= hi {
            return;
        }
        for (k, entry) in row.iter_mut().enumerate() {
            let theta = (y - nodes[k]) * dxi;
            *entry = dirichlet(theta, n) / n as f64;
        }
    });
    m
}

/// `sum_{m=0}^{n-1} e^{i theta (m - n/2)}`.
fn dirichlet(theta: f64, n: usize) -> Complex64 {
    let z = Complex64::from_polar(1.0, theta);
    let denom = z - 1.0;
    if denom.norm() < 1e-12 {
        // theta is a multiple of 2 pi and n/2 is even
        return Complex64::new(n as f64, 0.0);
    }
    let num = Complex64::from_polar(1.0, theta * n as f64) - 1.0;
    Complex64::from_polar(1.0, -theta * (n / 2) as f64) * num / denom
}

fn interpolate_separable(field: &Field, targets: &[f64]) -> Vec<Complex64> {
    let grid = field.grid;
    let n = grid.n;
    let nt = targets.len();
    let matrix = interpolation_matrix(&grid, targets);
    let mut shape = [1usize; 3];
    for s in shape.iter_mut().take(grid.dim) {
        *s = n;
    }
    let mut data = field.values.clone();
    for axis in 0..grid.dim {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..grid.dim].iter().product();
        let len_in = shape[axis];
        let mut out = vec![Complex64::default(); outer * nt * inner];
        out.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let o = idx / (nt * inner);
            let rem = idx % (nt * inner);
            let j = rem / inner;
            let i = rem % inner;
            let row = &matrix[j * n..(j + 1) * n];
            let base = o * len_in * inner + i;
            let mut acc = Complex64::default();
            for (k, a) in row.iter().enumerate() {
                acc += a * data[base + k * inner];
            }
            *v = acc;
        });
        data = out;
        shape[axis] = nt;
    }
    data
}
