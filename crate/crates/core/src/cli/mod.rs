//! Command-line workbench: experiment configs in, reports and gate verdicts
//! out.
//!
//! Exit codes: [`EXIT_OK`] when every gate named in the config passes,
//! [`EXIT_FAILURE`] on a failed gate or a failed computation, and
//! [`EXIT_CONFIG`] when the config is rejected.

mod cache;
mod config;
mod output;
mod run;

use thiserror::Error;

pub use cache::{cache_dir, cached_spectrum, CACHE_ENV};
pub use config::*;
pub use output::{content_hash, sha256_hex, Gate, Manifest, PlotData, SCHEMA_VERSION};
pub use run::{execute, run_experiment, Experiment, Invocation, Outcome};

use crate::boundary::BoundaryError;
use crate::propagator::PropagatorError;
use crate::quadrature::QuadratureError;
use crate::spectral::SpectralError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error("quadrature: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}
