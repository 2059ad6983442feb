//! Config-driven experiment runner for causal sensitivity identification.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
