//! Command-line front end: configuration, commands and the in-memory
//! pipeline they share.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{exit, CliError, CliResult};
