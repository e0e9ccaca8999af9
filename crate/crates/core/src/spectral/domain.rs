//! Confinement, cell-centred grids and the cut-cell geometry of the sector.
//!
//! Nodes sit at `lower + (i + 1/2) h` on every axis. The coincidence
//! hyperplanes `x_j = x_k` pass through the nodes with tied indices; each such
//! node owns the part of its cube that lies in the ordering region at hand.
//! The fractions below describe those cut cells: a node whose sorted index
//! vector splits into tie blocks of sizes `b_1, b_2, ...` owns `1/∏ b_i!` of
//! its cube in every adjacent region.

use serde::{Deserialize, Serialize};

use crate::boundary::{CouplingModel, FaceParameter};
use crate::spectral::SpectralError;

/// Largest particle count accepted for grid work.
pub const SPECTRAL_N_CAP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Confinement {
    /// Hard walls at `origin` and `origin + length` for every particle.
    Box { origin: f64, length: f64 },
    /// `½ ω² Σ x_i²` inside hard walls at `±half_width`.
    Harmonic { omega: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub n: usize,
    pub confinement: Confinement,
    /// Cells per axis; the spacing is the box length over this count.
    pub cells: usize,
}

impl DomainSpec {
    pub fn new(n: usize, confinement: Confinement, cells: usize) -> Result<Self, SpectralError> {
        if !(2..=SPECTRAL_N_CAP).contains(&n) {
            return Err(SpectralError::InvalidDomain(format!(
                "particle count {n} outside 2..={SPECTRAL_N_CAP}"
            )));
        }
        match confinement {
            Confinement::Box { origin, length } => {
                if !(length > 0.0 && length.is_finite() && origin.is_finite()) {
                    return Err(SpectralError::InvalidDomain(format!(
                        "box length {length} must be positive"
                    )));
                }
            }
            Confinement::Harmonic { omega, half_width } => {
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(SpectralError::InvalidDomain(format!(
                        "frequency {omega} must be positive"
                    )));
                }
                if !(half_width > 0.0 && half_width.is_finite()) {
                    return Err(SpectralError::InvalidDomain(format!(
                        "half width {half_width} must be positive"
                    )));
                }
            }
        }
        if cells < 3 {
            return Err(SpectralError::GridTooCoarse(format!(
                "{cells} cells per axis; need at least 3"
            )));
        }
        let dom = Self {
            n,
            confinement,
            cells,
        };
        // every wall sits half a cell away from the outermost node
        let h = dom.spacing();
        let first = dom.node_coord(0) - dom.lower();
        let last = dom.upper() - dom.node_coord(cells as u32 - 1);
        if (first - 0.5 * h).abs() > 1e-12 * h || (last - 0.5 * h).abs() > 1e-9 * h {
            return Err(SpectralError::InvalidDomain(
                "grid is not cell-centred".into(),
            ));
        }
        Ok(dom)
    }

    pub fn boxed(n: usize, length: f64, cells: usize) -> Result<Self, SpectralError> {
        Self::new(
            n,
            Confinement::Box {
                origin: 0.0,
                length,
            },
            cells,
        )
    }

    pub fn lower(&self) -> f64 {
        match self.confinement {
            Confinement::Box { origin, .. } => origin,
            Confinement::Harmonic { half_width, .. } => -half_width,
        }
    }

    pub fn length(&self) -> f64 {
        match self.confinement {
            Confinement::Box { length, .. } => length,
            Confinement::Harmonic { half_width, .. } => 2.0 * half_width,
        }
    }

    pub fn upper(&self) -> f64 {
        self.lower() + self.length()
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn node_coord(&self, i: u32) -> f64 {
        self.lower() + (i as f64 + 0.5) * self.spacing()
    }

    pub fn coords(&self, idx: &[u32]) -> Vec<f64> {
        idx.iter().map(|&i| self.node_coord(i)).collect()
    }

    /// External potential at a point (zero inside a box).
    pub fn potential(&self, x: &[f64]) -> f64 {
        match self.confinement {
            Confinement::Box { .. } => 0.0,
            Confinement::Harmonic { omega, .. } => {
                0.5 * omega * omega * x.iter().map(|v| v * v).sum::<f64>()
            }
        }
    }

    pub fn with_cells(&self, cells: usize) -> Result<Self, SpectralError> {
        Self::new(self.n, self.confinement, cells)
    }

    /// Same domain with `cells · 2^level` cells per axis.
    pub fn refined(&self, level: u32) -> Result<Self, SpectralError> {
        self.with_cells(self.cells << level)
    }

    /// Dilate the box by `lambda` about the coordinate origin, keeping the
    /// node count.
    pub fn dilated(&self, lambda: f64) -> Result<Self, SpectralError> {
        let confinement = match self.confinement {
            Confinement::Box { origin, length } => Confinement::Box {
                origin: origin * lambda,
                length: length * lambda,
            },
            Confinement::Harmonic { omega, half_width } => Confinement::Harmonic {
                omega: omega / (lambda * lambda),
                half_width: half_width * lambda,
            },
        };
        Self::new(self.n, confinement, self.cells)
    }

    /// Shift a box by `c` along every axis.
    pub fn translated(&self, c: f64) -> Result<Self, SpectralError> {
        match self.confinement {
            Confinement::Box { origin, length } => Self::new(
                self.n,
                Confinement::Box {
                    origin: origin + c,
                    length,
                },
                self.cells,
            ),
            Confinement::Harmonic { .. } => Err(SpectralError::InvalidDomain(
                "a harmonic trap is pinned at the origin and cannot be translated".into(),
            )),
        }
    }

    pub(crate) fn rank(&self, idx: &[u32]) -> usize {
        let mut r = 0usize;
        for &i in idx {
            r = r * self.cells + i as usize;
        }
        r
    }

    pub(crate) fn full_node_count(&self) -> usize {
        self.cells.pow(self.n as u32)
    }

    pub(crate) fn unrank(&self, mut r: usize, out: &mut [u32]) {
        for k in (0..self.n).rev() {
            out[k] = (r % self.cells) as u32;
            r /= self.cells;
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Tie block `(start, len)` of sorted position `q` in a weakly decreasing
/// index vector.
pub(crate) fn block_of(s: &[u32], q: usize) -> (usize, usize) {
    let mut start = q;
    while start > 0 && s[start - 1] == s[q] {
        start -= 1;
    }
    let mut end = q + 1;
    while end < s.len() && s[end] == s[q] {
        end += 1;
    }
    (start, end - start)
}

/// Fraction of the node's cube lying in one ordering region.
pub(crate) fn volume_fraction(s: &[u32]) -> f64 {
    let mut denom = 1.0;
    let mut q = 0;
    while q < s.len() {
        let (_, len) = block_of(s, q);
        denom *= factorial(len);
        q += len;
    }
    1.0 / denom
}

/// Fraction of the cube face crossed when sorted coordinate `q` moves up
/// (`up = true`) or down that belongs to the identity ordering region.
pub(crate) fn face_fraction(s: &[u32], q: usize, up: bool) -> f64 {
    let (start, len) = block_of(s, q);
    let allowed = if up { q == start } else { q == start + len - 1 };
    if allowed {
        len as f64 * volume_fraction(s)
    } else {
        0.0
    }
}

/// Fraction of the hyperplane `x_j = x_{j+1}` inside the cube that bounds the
/// identity ordering region (requires `s_j = s_{j+1}`).
pub(crate) fn interface_fraction(s: &[u32], j: usize) -> f64 {
    debug_assert_eq!(s[j], s[j + 1]);
    let (_, len) = block_of(s, j);
    len as f64 * volume_fraction(s)
}

/// Number of distinct coordinate permutations of an index vector.
pub(crate) fn orbit_size(s: &[u32]) -> usize {
    let mut sorted = s.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    (factorial(s.len()) * volume_fraction(&sorted)).round() as usize
}

/// The closed sector grid: weakly decreasing index vectors, minus nodes on
/// faces whose coupling is hard-core.
#[derive(Debug, Clone)]
pub struct SectorGrid {
    dom: DomainSpec,
    nodes: Vec<u32>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl SectorGrid {
    pub fn new(dom: &DomainSpec, model: &CouplingModel) -> Result<Self, SpectralError> {
        if model.n() != dom.n {
            return Err(SpectralError::InvalidDomain(format!(
                "coupling model is for n = {}, domain has n = {}",
                model.n(),
                dom.n
            )));
        }
        let n = dom.n;
        let mut nodes = Vec::new();
        let mut lookup = vec![ABSENT; dom.full_node_count()];
        let mut idx = vec![0u32; n];
        let mut count = 0u32;
        enumerate_weakly_decreasing(dom.cells as u32, n, 0, &mut idx, &mut |s| {
            if !is_hard_core(dom, model, s) {
                nodes.extend_from_slice(s);
                lookup[dom.rank(s)] = count;
                count += 1;
            }
        });
        let grid = Self {
            dom: *dom,
            nodes,
            lookup,
        };
        grid.check_resolution(model)?;
        Ok(grid)
    }

    /// Every coupled face must see at least three node layers.
    fn check_resolution(&self, model: &CouplingModel) -> Result<(), SpectralError> {
        let has_faces = (0..model.n() - 1)
            .any(|j| !matches!(model.entries()[j], crate::boundary::Coupling::Dirichlet));
        if has_faces && self.dom.cells < 2 * self.dom.n + 1 {
            return Err(SpectralError::GridTooCoarse(format!(
                "{} cells cannot resolve {} faces with three layers each",
                self.dom.cells,
                self.dom.n - 1
            )));
        }
        if self.is_empty() {
            return Err(SpectralError::GridTooCoarse(
                "sector grid has no nodes".into(),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.dom
    }

    pub fn n(&self) -> usize {
        self.dom.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dom.n
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[u32] {
        &self.nodes[i * self.dom.n..(i + 1) * self.dom.n]
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        self.dom.coords(self.node(i))
    }

    /// Index of a weakly decreasing index vector, if present.
    pub fn index_of(&self, s: &[u32]) -> Option<usize> {
        if s.iter().any(|&v| v as usize >= self.dom.cells) {
            return None;
        }
        match self.lookup[self.dom.rank(s)] {
            ABSENT => None,
            v => Some(v as usize),
        }
    }

    pub fn volume_fraction(&self, i: usize) -> f64 {
        volume_fraction(self.node(i))
    }

    /// Integration weight `h^n × volume fraction`.
    pub fn weight(&self, i: usize) -> f64 {
        self.dom.spacing().powi(self.dom.n as i32) * self.volume_fraction(i)
    }

    /// Whether sorted positions `j` and `j + 1` of node `i` are tied.
    pub fn on_face(&self, i: usize, j: usize) -> bool {
        let s = self.node(i);
        s[j] == s[j + 1]
    }
}

/// A node is removed when any of its ties sits on a hard-core face.
pub(crate) fn is_hard_core(dom: &DomainSpec, model: &CouplingModel, s: &[u32]) -> bool {
    let mut sorted = s.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let x = dom.coords(&sorted);
    (0..dom.n - 1).any(|j| {
        sorted[j] == sorted[j + 1]
            && matches!(model.face_parameter(j, &x), FaceParameter::Dirichlet)
    })
}

fn enumerate_weakly_decreasing(
    cells: u32,
    n: usize,
    k: usize,
    idx: &mut [u32],
    f: &mut dyn FnMut(&[u32]),
) {
    if k == n {
        f(idx);
        return;
    }
    let top = if k == 0 { cells } else { idx[k - 1] + 1 };
    for v in 0..top {
        idx[k] = v;
        enumerate_weakly_decreasing(cells, n, k + 1, idx, f);
    }
}
