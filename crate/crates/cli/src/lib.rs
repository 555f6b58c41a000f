//! Experiment harness for integrative conformal out-of-distribution testing:
//! configuration, CSV formats and Monte Carlo runners. The statistical
//! machinery lives in `conforma-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod registry;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiments::Setup;
