//! Numerical toolkit for the final-state problem of mass-subcritical NLS
//! with randomized scattering data.

pub mod error;
pub mod exponents;
mod fft;
pub mod grid;
pub mod montecarlo;
pub mod numeric;
pub mod profile;
pub mod propagator;
pub mod randomizer;
pub mod rng;
pub mod snapshot;
pub mod spacetime;
pub mod waveop;

pub use error::{Error, Result, Warning};
pub use exponents::{derive_exponents, ExponentSet};
pub use grid::{Field, Grid, Space};
pub use profile::{sample_profile, Profile};
