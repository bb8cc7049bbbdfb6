//! File formats, experiment configuration and command implementations around
//! [`ctdr_core`].

pub mod commands;
pub mod config;
pub mod datasets;
mod error;
pub mod files;
pub mod idx;
pub mod sparse;

pub use error::{CliError, CliResult};
