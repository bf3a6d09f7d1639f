//! Physical-space randomization `f^omega = sum_k g_k psi_k f` over the unit
//! lattice, sub-Gaussian coefficient ensembles, and Fourier-Lebesgue norms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Space};
use crate::numeric::stable_sum;
use crate::profile::plateau_bump;
use crate::rng::{keyed_rng, pack_key};

/// Distance from the box boundary within which data must vanish.
pub const MARGIN: f64 = 2.0;
/// Mass fraction tolerated inside the margin.
pub const MARGIN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Standard normal.
    Gaussian,
    /// Uniform on `{-1, 1}`.
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]` (unit variance).
    Uniform,
    /// Every coefficient equal to 1. Not mean zero; for testing only.
    Deterministic,
}

impl Ensemble {
    pub const ALL_RANDOM: [Ensemble; 3] = [Ensemble::Gaussian, Ensemble::Rademacher, Ensemble::Uniform];

    /// Tag stored in snapshot headers (0 means "not randomized").
    pub fn tag(self) -> u32 {
        match self {
            Ensemble::Gaussian => 1,
            Ensemble::Rademacher => 2,
            Ensemble::Uniform => 3,
            Ensemble::Deterministic => 4,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Ensemble> {
        match tag {
            1 => Some(Ensemble::Gaussian),
            2 => Some(Ensemble::Rademacher),
            3 => Some(Ensemble::Uniform),
            4 => Some(Ensemble::Deterministic),
            _ => None,
        }
    }

    /// Constant `c` with `|E e^{gamma g}| <= e^{c gamma^2}`; `None` for the
    /// deterministic ensemble, which is not sub-Gaussian in this sense.
    pub fn subgaussian_constant(self) -> Option<f64> {
        match self {
            Ensemble::Deterministic => None,
            _ => Some(0.5),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Ensemble::Gaussian => StandardNormal.sample(rng),
            Ensemble::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Ensemble::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            Ensemble::Deterministic => 1.0,
        }
    }

    /// Coefficient addressed by `(master seed, trial, lattice key)`.
    pub fn draw(self, master_seed: u64, trial: u64, key: [i64; 3]) -> f64 {
        if self == Ensemble::Deterministic {
            return 1.0;
        }
        self.sample(&mut keyed_rng(master_seed, trial, pack_key(key)))
    }

    /// `E e^{gamma g}` by numerical quadrature of the law.
    pub fn mgf_quadrature(self, gamma: f64) -> f64 {
        match self {
            Ensemble::Gaussian => {
                // trapezoid on [gamma - 40, gamma + 40]; spectrally accurate for the Gaussian
                let n = 4000;
                let a = gamma - 40.0;
                let step = 80.0 / n as f64;
                let s: f64 = (0..=n)
                    .map(|i| {
                        let x = a + i as f64 * step;
                        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                        w * (gamma * x - 0.5 * x * x).exp()
                    })
                    .sum();
                s * step / (2.0 * PI).sqrt()
            }
            Ensemble::Rademacher => 0.5 * (gamma.exp() + (-gamma).exp()),
            Ensemble::Uniform => {
                // composite Simpson on [-sqrt 3, sqrt 3]
                let n = 2000;
                let b = 3f64.sqrt();
                let step = 2.0 * b / n as f64;
                let s: f64 = (0..=n)
                    .map(|i| {
                        let x = -b + i as f64 * step;
                        let w = if i == 0 || i == n {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        w * (gamma * x).exp()
                    })
                    .sum();
                s * step / 3.0 / (2.0 * b)
            }
            Ensemble::Deterministic => gamma.exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgfCertificate {
    pub ensemble: Ensemble,
    pub c: f64,
    /// `max_gamma (ln E e^{gamma g} - c gamma^2)`; at most 0 for a valid certificate.
    pub max_log_excess: f64,
    pub holds: bool,
}

/// Check `E e^{gamma g} <= e^{c gamma^2}` on a grid of `gamma in [-10, 10]`.
pub fn mgf_certificate(ensemble: Ensemble) -> Result<MgfCertificate> {
    let c = ensemble.subgaussian_constant().ok_or_else(|| {
        Error::InvalidArgument("the deterministic ensemble has no sub-Gaussian constant".into())
    })?;
    let max_log_excess = (0..=400)
        .map(|i| {
            let gamma = -10.0 + 0.05 * i as f64;
            ensemble.mgf_quadrature(gamma).ln() - c * gamma * gamma
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MgfCertificate {
        ensemble,
        c,
        max_log_excess,
        holds: max_log_excess <= 1e-9,
    })
}

/// The normalized cutoffs `psi_k = phi(. - k) / sum_l phi(. - l)` on a grid,
/// stored sparsely per node.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    grid: Grid,
    cells: Vec<[i64; 3]>,
    /// CSR row offsets per grid node into `entries`.
    offsets: Vec<u32>,
    /// `(cell index, psi value)` pairs, cells in ascending order per node.
    entries: Vec<(u32, f64)>,
    denominators: Vec<f64>,
}

fn dist_to_box(k: &[i64; 3], dim: usize, lo: f64, hi: f64) -> f64 {
    (0..dim)
        .map(|i| {
            let c = k[i] as f64;
            if c < lo {
                lo - c
            } else if c > hi {
                c - hi
            } else {
                0.0
            }
        })
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Build the partition for the plateau bump of radius 1 (support radius 2).
pub fn build_partition(grid: &Grid) -> Result<PartitionOfUnity> {
    let l = grid.half_width();
    if l < 4.0 {
        return Err(Error::InvalidGrid(format!(
            "partition of unity needs half-width >= 4, got {l}"
        )));
    }
    let dim = grid.dim();
    let lo = -l;
    let hi = l - grid.spacing();
    let kmax = l.ceil() as i64 + 2;
    let side = (2 * kmax + 1) as usize;
    // dense lookup from lattice point to cell index
    let mut lookup = vec![u32::MAX; side.pow(dim as u32)];
    let mut cells = Vec::new();
    for flat in 0..side.pow(dim as u32) {
        let mut k = [0i64; 3];
        let mut rem = flat;
        for axis in (0..dim).rev() {
            k[axis] = (rem % side) as i64 - kmax;
            rem /= side;
        }
        if dist_to_box(&k, dim, lo, hi) < MARGIN {
            lookup[flat] = cells.len() as u32;
            cells.push(k);
        }
    }
    let dense = |k: &[i64; 3]| -> usize {
        (0..dim).fold(0usize, |acc, i| acc * side + (k[i] + kmax) as usize)
    };
    let rows: Vec<Vec<(u32, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.coords(i);
            let mut lo_k = [0i64; 3];
            let mut hi_k = [0i64; 3];
            for a in 0..dim {
                lo_k[a] = (x[a] - MARGIN).ceil() as i64;
                hi_k[a] = (x[a] + MARGIN).floor() as i64;
            }
            let mut row = Vec::new();
            let mut k = lo_k;
            'outer: loop {
                let r2: f64 = (0..dim).map(|a| (x[a] - k[a] as f64).powi(2)).sum();
                let v = plateau_bump(r2.sqrt());
                if v > 0.0 {
                    let idx = lookup[dense(&k)];
                    debug_assert_ne!(idx, u32::MAX);
                    row.push((idx, v));
                }
                for a in (0..dim).rev() {
                    if k[a] < hi_k[a] {
                        k[a] += 1;
                        continue 'outer;
                    }
                    k[a] = lo_k[a];
                }
                break;
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    let mut offsets = Vec::with_capacity(grid.len() + 1);
    let mut entries = Vec::new();
    let mut denominators = Vec::with_capacity(grid.len());
    offsets.push(0u32);
    for (index, mut row) in rows.into_iter().enumerate() {
        let denominator: f64 = row.iter().map(|e| e.1).sum();
        if denominator < 1e-12 {
            return Err(Error::BumpCoverage { index, denominator });
        }
        for e in row.iter_mut() {
            e.1 /= denominator;
        }
        denominators.push(denominator);
        entries.extend(row);
        offsets.push(entries.len() as u32);
    }
    Ok(PartitionOfUnity {
        grid: *grid,
        cells,
        offsets,
        entries,
        denominators,
    })
}

impl PartitionOfUnity {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Lattice points whose cutoff meets the box, in lexicographic order.
    pub fn cells(&self) -> &[[i64; 3]] {
        &self.cells
    }

    /// `sum_l phi(x - l)` at a grid node.
    pub fn denominator(&self, node: usize) -> f64 {
        self.denominators[node]
    }

    /// `(cell index, psi_k(x))` for the cutoffs that are nonzero at a node.
    pub fn entries(&self, node: usize) -> &[(u32, f64)] {
        &self.entries[self.offsets[node] as usize..self.offsets[node + 1] as usize]
    }

    pub fn overlap_count(&self, node: usize) -> usize {
        self.entries(node).len()
    }

    pub fn max_overlap(&self) -> usize {
        (0..self.grid.len()).map(|i| self.overlap_count(i)).max().unwrap_or(0)
    }

    /// `sum_k psi_k(x)` at a node.
    pub fn partition_sum(&self, node: usize) -> f64 {
        self.entries(node).iter().map(|e| e.1).sum()
    }

    /// `psi_k` sampled on the grid, as a field.
    pub fn cutoff(&self, cell: usize) -> Field {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let v = self
                    .entries(i)
                    .iter()
                    .find(|e| e.0 as usize == cell)
                    .map_or(0.0, |e| e.1);
                Complex64::new(v, 0.0)
            })
            .collect();
        Field::from_parts(self.grid, Space::Physical, values)
    }

    /// `psi_k f` for every cell, skipping those with `||psi_k f||_2 <= cutoff * ||f||_2`.
    /// Returns `(cell index, field)` pairs in cell order.
    pub fn localized_pieces(&self, f: &Field, cutoff: f64) -> Result<Vec<(usize, Field)>> {
        self.check_grid(f)?;
        let mut pieces: Vec<Vec<Complex64>> = vec![Vec::new(); self.cells.len()];
        let n = self.grid.len();
        for (i, v) in f.values().iter().enumerate() {
            if *v == Complex64::default() {
                continue;
            }
            for &(cell, psi) in self.entries(i) {
                let piece = &mut pieces[cell as usize];
                if piece.is_empty() {
                    piece.resize(n, Complex64::default());
                }
                piece[i] = v * psi;
            }
        }
        let threshold = cutoff * f.l2_norm();
        Ok(pieces
            .into_iter()
            .enumerate()
            .filter(|(_, p)| !p.is_empty())
            .map(|(k, p)| (k, Field::from_parts(self.grid, Space::Physical, p)))
            .filter(|(_, p)| p.l2_norm() > threshold)
            .collect())
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if f.space() != Space::Physical || !f.grid().approx_eq(&self.grid) {
            return Err(Error::GridMismatch(
                "field does not live on the partition's grid".into(),
            ));
        }
        Ok(())
    }

    /// Mass fraction of `f` within distance 2 of the box boundary.
    pub fn margin_fraction(&self, f: &Field) -> f64 {
        let l = self.grid.half_width();
        let hi = l - self.grid.spacing();
        let dim = self.grid.dim();
        f.mass_fraction_where(|x| x[..dim].iter().any(|c| *c < -l + MARGIN || *c > hi - MARGIN))
    }

    pub fn check_margin(&self, f: &Field) -> Result<()> {
        let fraction = self.margin_fraction(f);
        if fraction > MARGIN_TOL {
            return Err(Error::TruncationBias { fraction });
        }
        Ok(())
    }

    /// Coefficients for every cell, in cell order.
    pub fn draw_coefficients(&self, ensemble: Ensemble, master_seed: u64, trial: u64) -> Vec<f64> {
        draw_coefficients(ensemble, &self.cells, master_seed, trial)
    }

    /// `f * sum_k c_k psi_k` for an explicit coefficient vector.
    pub fn combine(&self, f: &Field, coefficients: &[f64]) -> Result<Field> {
        self.check_grid(f)?;
        if coefficients.len() != self.cells.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for {} cells",
                coefficients.len(),
                self.cells.len()
            )));
        }
        let values = f
            .values()
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                let m: f64 = self
                    .entries(i)
                    .iter()
                    .map(|&(k, psi)| coefficients[k as usize] * psi)
                    .sum();
                v * m
            })
            .collect();
        Ok(Field::from_parts(self.grid, Space::Physical, values))
    }

    /// `f^omega` for the trial's coefficients.
    pub fn randomize(&self, f: &Field, ensemble: Ensemble, master_seed: u64, trial: u64) -> Result<Field> {
        self.check_grid(f)?;
        self.check_margin(f)?;
        self.combine(f, &self.draw_coefficients(ensemble, master_seed, trial))
    }

    /// `sum_k ||w psi_k f||_2^2` against `||w f||_2^2` for the weight `w = |x|^eps`.
    pub fn weighted_split_ratio(&self, f: &Field, eps: f64) -> Result<SplitRatio> {
        self.check_grid(f)?;
        let dim = self.grid.dim();
        let grid = self.grid;
        let indexed: Vec<(usize, &Complex64)> = f.values().iter().enumerate().collect();
        let weight = |i: usize| {
            if eps == 0.0 {
                1.0
            } else {
                let x = grid.coords(i);
                x[..dim].iter().map(|c| c * c).sum::<f64>().powf(eps)
            }
        };
        let cell = grid.cell_volume();
        let whole = stable_sum(&indexed, |(i, v)| weight(*i) * v.norm_sqr()) * cell;
        let split = stable_sum(&indexed, |(i, v)| {
            let s2: f64 = self.entries(*i).iter().map(|e| e.1 * e.1).sum();
            weight(*i) * v.norm_sqr() * s2
        }) * cell;
        Ok(SplitRatio {
            split,
            whole,
            ratio: if whole > 0.0 { split / whole } else { 1.0 },
        })
    }

    pub fn l2_split_ratio(&self, f: &Field) -> Result<SplitRatio> {
        self.weighted_split_ratio(f, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub split: f64,
    pub whole: f64,
    pub ratio: f64,
}

/// Coefficients for the given lattice keys, in key order.
pub fn draw_coefficients(ensemble: Ensemble, keys: &[[i64; 3]], master_seed: u64, trial: u64) -> Vec<f64> {
    keys.iter()
        .map(|k| ensemble.draw(master_seed, trial, *k))
        .collect()
}

/// `||f^||_{L^rho}` for `rho in (2, inf)`.
pub fn fourier_lebesgue_norm(f: &Field, rho: f64) -> Result<f64> {
    if !(rho > 2.0 && rho.is_finite()) {
        return Err(Error::InvalidExponent {
            value: rho,
            reason: "Fourier-Lebesgue exponent must lie in (2, inf)",
        });
    }
    f.fourier()?.lp_norm(rho)
}

/// Hausdorff-Young constant `(2 pi)^{d / rho}` for the transform convention in use.
pub fn hausdorff_young_constant(dim: usize, rho: f64) -> f64 {
    (2.0 * PI).powf(dim as f64 / rho)
}

/// `|| |x|^eps f ||_2`.
pub fn weighted_l2_norm(f: &Field, eps: f64) -> f64 {
    let grid = *f.grid();
    let dim = grid.dim();
    let indexed: Vec<(usize, &Complex64)> = f.values().iter().enumerate().collect();
    (stable_sum(&indexed, |(i, v)| {
        let x = grid.coords(*i);
        x[..dim].iter().map(|c| c * c).sum::<f64>().powf(eps) * v.norm_sqr()
    }) * grid.cell_volume())
    .sqrt()
}
