//! Experiment driver for the `phydrl` command-line tool: configuration files,
//! on-disk formats and the subcommands (synth, verify, train, eval, analyze,
//! compare, calibrate).

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::ExperimentConfig;
pub use error::CliError;
