//! Discretized Hamiltonians for the sector/Robin, boson/δ and fermion/ε
//! formulations, a symmetric eigensolver, and the duality reports.

pub mod domain;
pub mod eigen;
pub mod operator;
pub mod report;

use thiserror::Error;

use crate::boundary::BoundaryError;
use crate::statistics::StatisticsError;

pub use domain::{Confinement, DomainSpec, SectorGrid};
pub use eigen::{expm_action, solve, solve_dense, SolverOptions, SpectrumResult};
pub use operator::{
    build, build_delta_bose, build_delta_bose_full, build_epsilon_fermi,
    build_epsilon_fermi_unfolded, build_hard_core_bose, build_sector, CsrMatrix, Formulation,
    GridOperator, Layout,
};
pub use report::{
    duality_report, duality_report_for, formulations_for, scale_invariance_report, DualityReport,
    ScaleInvarianceReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("unsupported coupling: {0}")]
    UnsupportedCoupling(String),
    #[error("eigensolver did not converge after {restarts} restarts ({converged}/{wanted} pairs, worst residual {worst_residual:e})")]
    NotConverged {
        restarts: usize,
        converged: usize,
        wanted: usize,
        worst_residual: f64,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Statistics(#[from] StatisticsError),
}
