//! Command-line front end: CSV ingestion, command dispatch and JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod input;
pub mod json;
pub mod report;

pub use args::{Cli, Command};
pub use commands::{execute, run, Outcome, OUTPUT_DIR_ENV};
pub use error::{CliError, ErrorObject};
pub use report::{Report, Status};
