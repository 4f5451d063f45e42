//! Command-line driver: data ingestion, configuration, and report emission
//! for the `lpa` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod verify;

pub use error::{CliError, CliResult};
