//! Particle statistics: the two one-dimensional characters of `S_n`, the
//! equivariant extension of sector functions to the full space, and the
//! boson-fermion map.
//!
//! A full-space grid function is stored as `n!` copies of the closed sector
//! grid, one per ordering region. Copy `σ` holds the values on the region
//! `x_{σ(1)} > ... > x_{σ(n)}`, at the points `x` with `σx = s` for sector
//! nodes `s`. Nodes on a coincidence hyperplane appear once per adjacent
//! region, so one-sided limits (and the sign product) stay well defined.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_space::{enumerate_group, Parity, Permutation};
use crate::spectral::domain::SectorGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Bose,
    Fermi,
}

/// `χ(σ)`: 1 for bosons, `sgn σ` for fermions.
pub fn character(stat: Statistics, sigma: &Permutation) -> i8 {
    match stat {
        Statistics::Bose => 1,
        Statistics::Fermi => sigma.sign(),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatisticsError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("not equivariant at sector node {node} under {permutation:?}: residual {residual:e}")]
    NotEquivariant {
        node: usize,
        permutation: Permutation,
        residual: f64,
    },
}

/// Relative tolerance for the equivariance check.
pub const EQUIVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Sector,
    Full,
}

#[derive(Debug, Clone)]
pub struct WavefunctionGrid {
    grid: Arc<SectorGrid>,
    space: Space,
    stat: Option<Statistics>,
    group: Arc<Vec<Permutation>>,
    values: Vec<Complex64>,
}

impl WavefunctionGrid {
    pub fn sector(grid: Arc<SectorGrid>, values: Vec<Complex64>) -> Result<Self, StatisticsError> {
        if values.len() != grid.len() {
            return Err(StatisticsError::GridMismatch(format!(
                "{} values for {} sector nodes",
                values.len(),
                grid.len()
            )));
        }
        let group = Arc::new(enumerate_group(grid.n(), Parity::All).expect("spectral n is capped"));
        Ok(Self {
            grid,
            space: Space::Sector,
            stat: None,
            group,
            values,
        })
    }

    pub fn sector_real(grid: Arc<SectorGrid>, values: &[f64]) -> Result<Self, StatisticsError> {
        Self::sector(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    /// Full-space function laid out as `n!` sector copies in group
    /// enumeration order.
    pub fn full(
        grid: Arc<SectorGrid>,
        stat: Option<Statistics>,
        values: Vec<Complex64>,
    ) -> Result<Self, StatisticsError> {
        let group = Arc::new(enumerate_group(grid.n(), Parity::All).expect("spectral n is capped"));
        if values.len() != grid.len() * group.len() {
            return Err(StatisticsError::GridMismatch(format!(
                "{} values, but the symmetric closure of the sector grid has {} nodes",
                values.len(),
                grid.len() * group.len()
            )));
        }
        Ok(Self {
            grid,
            space: Space::Full,
            stat,
            group,
            values,
        })
    }

    /// Sample a single-valued function of full-grid index vectors on every
    /// region copy.
    pub fn from_full_nodal<F>(
        grid: Arc<SectorGrid>,
        stat: Option<Statistics>,
        f: F,
    ) -> Result<Self, StatisticsError>
    where
        F: Fn(&[u32]) -> Complex64,
    {
        let group = enumerate_group(grid.n(), Parity::All).expect("spectral n is capped");
        let m = grid.len();
        let mut values = Vec::with_capacity(m * group.len());
        for sigma in &group {
            let inv = sigma.inverse();
            for i in 0..m {
                values.push(f(&inv.apply(grid.node(i))));
            }
        }
        Self::full(grid, stat, values)
    }

    pub fn grid(&self) -> &Arc<SectorGrid> {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn statistics(&self) -> Option<Statistics> {
        self.stat
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn group(&self) -> &[Permutation] {
        &self.group
    }

    /// Values of the region copy with group index `g` (full space only).
    pub fn copy(&self, g: usize) -> &[Complex64] {
        let m = self.grid.len();
        &self.values[g * m..(g + 1) * m]
    }

    /// Coordinates of node `i` of copy `g`: the point `x` with `σ_g x = s_i`.
    pub fn full_coords(&self, g: usize, i: usize) -> Vec<f64> {
        self.group[g].inverse().apply(&self.grid.coords(i))
    }

    /// `∫ |ψ|²` over the declared domain.
    pub fn norm_sq(&self) -> f64 {
        let m = self.grid.len();
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| self.grid.weight(k % m) * v.norm_sqr())
            .sum()
    }

    pub fn normalized(mut self) -> Self {
        let norm = self.norm_sq().sqrt();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Weighted inner product `∫ conj(self) other`.
    pub fn inner(&self, other: &WavefunctionGrid) -> Result<Complex64, StatisticsError> {
        if self.space != other.space
            || self.values.len() != other.values.len()
            || !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.len() != other.grid.len()
        {
            return Err(StatisticsError::GridMismatch(
                "inner product of functions on different grids".into(),
            ));
        }
        let m = self.grid.len();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(k, (a, b))| a.conj() * b * self.grid.weight(k % m))
            .sum())
    }

    fn require(&self, space: Space) -> Result<(), StatisticsError> {
        if self.space != space {
            return Err(StatisticsError::GridMismatch(format!(
                "expected a {space:?} function, got {:?}",
                self.space
            )));
        }
        Ok(())
    }

    /// Equivariance `ψ(σx) = χ(σ) ψ(x)` across all region copies.
    pub fn check_equivariance(&self, stat: Statistics) -> Result<(), StatisticsError> {
        self.require(Space::Full)?;
        let m = self.grid.len();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let base = self.copy(0);
        for (g, sigma) in self.group.iter().enumerate().skip(1) {
            let chi = character(stat, sigma) as f64;
            for i in 0..m {
                let residual = (self.values[g * m + i] - base[i] * chi).norm() / scale;
                if residual > EQUIVARIANCE_TOL {
                    return Err(StatisticsError::NotEquivariant {
                        node: i,
                        permutation: sigma.clone(),
                        residual,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Extend a sector function to the full space with statistics `stat`; each
/// region carries `χ(σ)/sqrt(n!)` times the sector values so the norm is
/// preserved.
pub fn extend(
    psi: &WavefunctionGrid,
    stat: Statistics,
) -> Result<WavefunctionGrid, StatisticsError> {
    psi.require(Space::Sector)?;
    let scale = 1.0 / (psi.group.len() as f64).sqrt();
    let mut values = Vec::with_capacity(psi.values.len() * psi.group.len());
    for sigma in psi.group.iter() {
        let c = character(stat, sigma) as f64 * scale;
        values.extend(psi.values.iter().map(|v| v * c));
    }
    WavefunctionGrid::full(psi.grid.clone(), Some(stat), values)
}

/// Left inverse of [`extend`]: checks equivariance, then returns
/// `sqrt(n!)` times the identity-region copy.
pub fn restrict(
    psi: &WavefunctionGrid,
    stat: Statistics,
) -> Result<WavefunctionGrid, StatisticsError> {
    psi.check_equivariance(stat)?;
    let scale = (psi.group.len() as f64).sqrt();
    WavefunctionGrid::sector(
        psi.grid.clone(),
        psi.copy(0).iter().map(|v| v * scale).collect(),
    )
}

/// Boson-fermion map: multiply by `∏_{j<k} sgn(x_j - x_k)`, which equals the
/// sign of the region's ordering permutation.
pub fn bf_map(psi_b: &WavefunctionGrid) -> Result<WavefunctionGrid, StatisticsError> {
    psi_b.check_equivariance(Statistics::Bose)?;
    let m = psi_b.grid.len();
    let mut values = psi_b.values.clone();
    for (g, sigma) in psi_b.group.iter().enumerate() {
        if sigma.sign() < 0 {
            for v in &mut values[g * m..(g + 1) * m] {
                *v = -*v;
            }
        }
    }
    WavefunctionGrid::full(psi_b.grid.clone(), Some(Statistics::Fermi), values)
}
