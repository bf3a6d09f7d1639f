//! Shared fixtures for the kernel benchmarks.

use scatterlab::{sample_profile, Field, Grid, Profile};

/// Unit Gaussian sampled on a `dim`-dimensional grid with `n` points per axis.
pub fn gaussian(dim: usize, n: usize, half_width: f64) -> Field {
    let grid = Grid::new(dim, n, half_width).expect("valid grid");
    sample_profile(&grid, &Profile::gaussian(1.0)).expect("valid profile")
}
