//! Experiment harness for the `edgecache-core` simulator: configuration,
//! CSV and JSON artifacts, parallel sweeps, seed aggregation and the
//! `edgecache` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod sweep;

pub use config::{Axis, ExperimentConfig};
pub use error::{CliError, Result};
