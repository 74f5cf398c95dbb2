//! Experiment runner for the nonlinear Helmholtz solver: configuration,
//! parameter sweeps, CSV/SVG output and run manifests.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;
pub mod sweep;

pub use commands::{contraction, convergence, iterations, mesh_info, solve, ReferenceCache};
pub use config::{Case, RunConfig};

use nlhelm_core::{FemError, SolverError};

/// Environment variable holding the number of worker threads for sweeps.
pub const THREADS_ENV: &str = "NLHELM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            _ => 1,
        }
    }
}

/// Worker count from [`THREADS_ENV`]; 1 when unset.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}
