//! Experiment harness for the extruder temperature-tracking benchmark:
//! configuration, runners, CSV artifacts, figures and the comparison report.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod plot;
pub mod report;

pub use config::{Experiment, ExperimentConfig, Manifest};
pub use error::{CliError, Result};
pub use experiments::{run, run_compare, run_finite, run_infinite, run_qlearn};
pub use report::CompareReport;
