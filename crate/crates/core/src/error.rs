use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: only d = 1, 2, 3 are supported")]
    UnsupportedDimension(usize),
    #[error("exponent system infeasible: {0}")]
    Infeasible(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid exponent {value}: {reason}")]
    InvalidExponent { value: f64, reason: &'static str },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("profile escapes the box: outside mass fraction {outside:.3e}")]
    TruncationOverflow { outside: f64 },
    #[error("singular time t = 0 for the Fresnel representation")]
    SingularTime,
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("bump coverage failure at grid index {index}: partition denominator {denominator:.3e}")]
    BumpCoverage { index: usize, denominator: f64 },
    #[error("datum violates the partition margin: mass fraction {fraction:.3e} within distance 2 of the box boundary")]
    TruncationBias { fraction: f64 },
    #[error("divergent time tail: q * decay rate = {product:.6} <= 1")]
    DivergentTail { product: f64 },
    #[error("Picard map is not contracting (measured eta = {eta:.6e}, ratios {ratios:?})")]
    EtaTooLarge { eta: f64, ratios: Vec<f64> },
    #[error("iteration blew up (non-finite values) at iteration {iteration}")]
    BlowUp { iteration: usize },
    #[error("split-step phase overflow: max |u|^p dt = {phase:.4} exceeds pi/4")]
    StepTooLarge { phase: f64 },
    #[error("grid misconfigured: {0}")]
    GridMisconfigured(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Configuration-type errors (bad inputs) as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedDimension(_)
                | Error::Infeasible(_)
                | Error::NotApplicable(_)
                | Error::InvalidExponent { .. }
                | Error::InvalidGrid(_)
                | Error::GridMismatch(_)
                | Error::InvalidArgument(_)
                | Error::Format(_)
                | Error::Io(_)
        )
    }
}

/// Non-fatal diagnostics attached to numerical results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// Mass fraction in the outer shell of a periodic box exceeded 1e-6.
    WraparoundContamination { fraction: f64 },
    /// Fresnel evaluation below the recommended minimum time.
    FresnelUnderResolved { t: f64, t_min: f64 },
    /// Extrapolated time tail carries more than 20% of the q-th power.
    HorizonTooShort { tail_fraction: f64 },
    /// Duhamel tail correction exceeds 10% of the result norm.
    DuhamelTail { fraction: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::WraparoundContamination { fraction } => {
                write!(f, "wraparound contamination: boundary mass fraction {fraction:.3e}")
            }
            Warning::FresnelUnderResolved { t, t_min } => {
                write!(f, "Fresnel evaluation at t = {t} below t_min = {t_min:.4}")
            }
            Warning::HorizonTooShort { tail_fraction } => {
                write!(f, "horizon too short: tail fraction {tail_fraction:.3}")
            }
            Warning::DuhamelTail { fraction } => {
                write!(f, "Duhamel tail correction is {fraction:.3} of the result")
            }
        }
    }
}
