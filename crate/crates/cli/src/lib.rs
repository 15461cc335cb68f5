//! Operator entry point: `validate`, `analyze`, `serve`, `report`, and
//! `synth` for fixture datasets.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::run;
pub use config::{Cli, RunConfig};
pub use error::CliError;
