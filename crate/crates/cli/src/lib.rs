//! Library side of the `twostage` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

pub use error::{CliError, CliResult};
