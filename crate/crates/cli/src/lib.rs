//! File formats, report tables and subcommands of the `lcmix` tool.
//!
//! The estimation itself lives in `lcmix-core`; this crate reads CSV data
//! described by a column specification, writes JSON result documents and
//! CSV posteriors, and runs the simulated population studies.

pub mod colspec;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod result;
pub mod study;
pub mod tables;
pub mod truth;

pub use error::{CliError, CliResult};
