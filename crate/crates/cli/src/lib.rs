//! Configuration, artifact output and the experiment runner behind the
//! `malab` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod manifest;
pub mod output;
pub mod verify;

pub use error::{CliError, CliResult};
