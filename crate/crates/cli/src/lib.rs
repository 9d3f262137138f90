//! Orchestration for NLS decay experiments: run configuration, snapshot and
//! report files, the `simulate`/`measure`/`fit`/`sweep` commands and the
//! built-in verification suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod snapshot;
pub mod verify;

pub use error::{CliError, Result};
