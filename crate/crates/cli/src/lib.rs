//! Batch experiment runner: configuration, commands and artifact output.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_game, cmd_lambda, cmd_pipeline, cmd_quality, cmd_transfer, Outcome};
pub use config::ExperimentConfig;
pub use error::{exit, CliError};
