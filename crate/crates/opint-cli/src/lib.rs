//! Batch experiment runner around the `opint` library: named verification
//! suites over seeded random instances, with JSON reports and optional CSV
//! tables for plotting.
//!
//! The binary is a thin argument parser; everything observable lives here so
//! integration tests can drive suites in-process. Reports are deterministic
//! functions of the configuration: a fixed suite, seed, size, and trial count
//! reproduce byte-identical JSON up to the wall-time field.

pub mod config;
pub mod fnlib;
pub mod logging;
pub mod output;
pub mod suites;

pub use config::{ExperimentConfig, PartialConfig};
pub use output::{strip_wall_time, SuiteReport};
pub use suites::{run_suite, SuiteRun};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
