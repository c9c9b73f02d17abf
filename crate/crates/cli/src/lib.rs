//! Command-line front end for `cpmiss`: synthetic benchmarks, interval
//! prediction on CSV data, and coverage audits of interval files.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use error::{CliError, CliResult};
