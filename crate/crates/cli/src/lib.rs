//! Command-line harness: experiment configuration, artifact writing and the
//! acceptance reproduction suite.

pub mod calibration;
pub mod config;
pub mod error;
pub mod run;
pub mod suite;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, CliResult};
