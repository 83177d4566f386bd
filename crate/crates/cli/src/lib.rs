//! Configuration, run orchestration and reporting for the `dampedwave`
//! command-line tool.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod sweep;

pub use error::{CliError, Result};
