//! Command-line front end for the circuit-synthesis pipeline.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::CliError;
