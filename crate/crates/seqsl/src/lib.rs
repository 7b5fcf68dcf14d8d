//! File formats, configuration, subcommands and the Monte Carlo verification
//! harness around `seqsl-core`.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod manifest;
pub mod verify;

pub use config::ExperimentConfig;
