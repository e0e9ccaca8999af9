//! Imaginary-time kernels on the coincidence-free space and on the sector,
//! the character-weighted permutation sum, and numerical checks of the
//! kernel properties.
//!
//! Time is imaginary throughout (`τ = it`): kernels solve
//! `∂_τ K = ½ ∇²_x K`. Unitarity becomes symmetry `K(x,y) = K(y,x)` and the
//! Schrödinger equation becomes the heat equation; everything else carries
//! over unchanged.

mod evolve;
mod kernels;
mod verify;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::boundary::{BoundaryError, CouplingModel};
use crate::config_space::GeometryError;
use crate::quadrature::QuadratureError;
use crate::spectral::SpectralError;
use crate::statistics::{Space, Statistics, StatisticsError};

pub use evolve::{
    ground_state_projection, propagate, propagation_report, real_time_cross_check,
    GroundStateProjection, InitialState, PropagationReport, PropagationSpec, RealTimeReport,
};
pub use kernels::{
    delta_pair_kernel, epsilon_pair_kernel, free_kernel, hard_core_bose_kernel, permutation_sum,
    robin_pair_kernel, robin_relative_kernel,
};
pub use verify::{
    dual_reconstruction_check, robin_pde_check, verify_assumptions, verify_sector_properties,
    AssumptionReport, DualReport, LadderRung, PdeCheck, SamplingSpec, SectorPropertyReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("kernel is only available for n = 2, got n = {n}")]
    UnsupportedN { n: usize },
    #[error("permutation group too large: {0}")]
    CapExceeded(GeometryError),
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(#[from] QuadratureError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Statistics(#[from] StatisticsError),
}

/// Contact data a kernel was built for.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelCoupling {
    Free,
    Model(CouplingModel),
}

type KernelFn = dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync;

/// A kernel `K(x, y; τ)` with the metadata needed to check it.
#[derive(Clone)]
pub struct KernelEvaluator {
    eval: Arc<KernelFn>,
    space: Space,
    stat: Option<Statistics>,
    coupling: KernelCoupling,
    n: usize,
    /// Largest `|1/(2a)|` over the faces; sets how far attractive kernels
    /// reach beyond the Gaussian core.
    rate: f64,
    label: String,
}

impl fmt::Debug for KernelEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelEvaluator")
            .field("label", &self.label)
            .field("space", &self.space)
            .field("stat", &self.stat)
            .field("n", &self.n)
            .finish()
    }
}

impl KernelEvaluator {
    /// Wrap an arbitrary kernel, e.g. a deliberately broken one for a
    /// negative control.
    pub fn new<F>(
        label: impl Into<String>,
        n: usize,
        space: Space,
        stat: Option<Statistics>,
        coupling: KernelCoupling,
        eval: F,
    ) -> Self
    where
        F: Fn(&[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        let rate = match &coupling {
            KernelCoupling::Free => 0.0,
            KernelCoupling::Model(m) => m
                .entries()
                .iter()
                .map(|c| match c {
                    crate::boundary::Coupling::Robin(a) => 0.5 / a.abs(),
                    _ => 0.0,
                })
                .fold(0.0, f64::max),
        };
        Self {
            eval: Arc::new(eval),
            space,
            stat,
            coupling,
            n,
            rate,
            label: label.into(),
        }
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64], tau: f64) -> f64 {
        (self.eval)(x, y, tau)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn statistics(&self) -> Option<Statistics> {
        self.stat
    }

    pub fn coupling(&self) -> &KernelCoupling {
        &self.coupling
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Per-coordinate distance beyond which `K(·, y; τ)` is below `1e-16`
    /// of its peak.
    pub fn reach(&self, tau: f64) -> f64 {
        12.0 * tau.sqrt() + 2.0 * self.rate * tau
    }

    /// The same kernel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |x, y, t| factor * inner(x, y, t)),
            label: format!("{}×{factor}", self.label),
            ..self.clone()
        }
    }
}
