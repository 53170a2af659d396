//! Experiment harness for dMCCA: dataset containers, configuration, sweeps
//! and the train / transform / eval pipeline.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod experiments;
pub mod idx;
pub mod nmnist;
pub mod output;
pub mod pipeline;

pub use error::{CliError, CliResult};
