//! Command-line driver for `cavity-dimer-core`: TOML configuration, CSV/JSON
//! output, run manifests, and thread-count-independent parallel scans.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod config;
pub mod jobs;
pub mod manifest;
pub mod table;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] cavity_dimer_core::Error),
    #[error("refusing to write non-finite value in column `{column}` (row {row})")]
    NonFinite { column: String, row: usize },
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const IO: i32 = 5;
}

impl AppError {
    /// Validation failures (bad input) and numerical failures (the solver
    /// could not deliver) map to distinct codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => exit::VALIDATION,
            AppError::Io(_) => exit::IO,
            AppError::Core(e) if e.is_validation() => exit::VALIDATION,
            AppError::Core(_) | AppError::NonFinite { .. } => exit::NUMERICAL,
        }
    }
}
