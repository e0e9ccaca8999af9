//! Finite-volume assembly of the three formulations.
//!
//! Every operator is stored as `S = M^{-1/2} K M^{-1/2}` where `K` is the
//! stiffness matrix of the quadratic form `½∫|∇ψ|² + ∫Vψ² + boundary terms`
//! and `M` the diagonal mass. Eigenvectors `y` of `S` map to nodal values
//! `ψ = M^{-1/2} y`.
//!
//! * Sector: cut cells of the closed sector, Robin terms on the face
//!   portions inside each cell.
//! * DeltaBose: the plain full grid with an on-node contact potential on
//!   tied nodes, reduced to the symmetric subspace.
//! * EpsilonFermi: `n!` copies of the closed sector joined across each
//!   coincidence hyperplane by a resistive layer of conductance `1/(2a)`,
//!   reduced to the antisymmetric subspace.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::domain::{
    block_of, face_fraction, interface_fraction, is_hard_core, orbit_size, DomainSpec, SectorGrid,
};
use super::SpectralError;
use crate::boundary::{Coupling, CouplingModel, FaceParameter};
use crate::config_space::{enumerate_group, Parity, Permutation};
use crate::statistics::{Statistics, WavefunctionGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Sector,
    DeltaBose,
    /// The `a → 0` limit of the boson model: tied nodes removed.
    HardCoreBose,
    EpsilonFermi,
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Sector => "sector",
            Formulation::DeltaBose => "delta_bose",
            Formulation::HardCoreBose => "hard_core_bose",
            Formulation::EpsilonFermi => "epsilon_fermi",
        }
    }
}

/// How the operator's unknowns relate to the sector grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// One unknown per sector node (equivariant subspace or sector itself).
    Reduced,
    /// Every active node of the full grid, by row-major rank.
    FullGrid { ranks: Vec<usize> },
    /// `n!` sector copies, unknown `g·m + i` in group enumeration order.
    Unfolded,
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Rows given as unsorted `(column, value)` lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (c, v) in row {
                if c == last {
                    *data.last_mut().expect("entry exists") += v;
                } else {
                    indices.push(c as u32);
                    data.push(v);
                    last = c;
                }
            }
            indptr.push(indices.len());
        }
        Self {
            dim,
            indptr,
            indices,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .map(|&c| c as usize)
            .zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in self.indptr[i]..self.indptr[i + 1] {
            acc += self.data[k] * x[self.indices[k] as usize];
        }
        acc
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if self.dim > 20_000 {
                y.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
                    for (k, out) in chunk.iter_mut().enumerate() {
                        *out = self.row_dot(c * 4096 + k, x);
                    }
                });
                return;
            }
        }
        for (i, out) in y.iter_mut().enumerate() {
            *out = self.row_dot(i, x);
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Gershgorin bounds on the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut d = 0.0;
            let mut off = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    d += v;
                } else {
                    off += v.abs();
                }
            }
            lo = lo.min(d - off);
            hi = hi.max(d + off);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct GridOperator {
    formulation: Formulation,
    model: CouplingModel,
    grid: Arc<SectorGrid>,
    layout: Layout,
    matrix: CsrMatrix,
    mass: Vec<f64>,
}

impl GridOperator {
    fn assemble(
        formulation: Formulation,
        model: &CouplingModel,
        grid: Arc<SectorGrid>,
        layout: Layout,
        rows: Vec<Vec<(usize, f64)>>,
        mass: Vec<f64>,
    ) -> Self {
        let scale: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .map(|(j, v)| (j, v * scale[i] * scale[j]))
                    .collect()
            })
            .collect();
        Self {
            formulation,
            model: model.clone(),
            grid,
            layout,
            matrix: CsrMatrix::from_rows(rows),
            mass,
        }
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn model(&self) -> &CouplingModel {
        &self.model
    }

    pub fn domain(&self) -> &DomainSpec {
        self.grid.domain()
    }

    pub fn grid(&self) -> &Arc<SectorGrid> {
        &self.grid
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y)
    }

    /// Largest `|⟨u, Av⟩ - ⟨Au, v⟩|` over `trials` random unit pairs.
    pub fn symmetry_defect(&self, trials: usize, seed: u64) -> f64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let mut worst = 0.0f64;
        let mut au = vec![0.0; n];
        let mut av = vec![0.0; n];
        for _ in 0..trials {
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            normalize(&mut u);
            normalize(&mut v);
            self.apply(&u, &mut au);
            self.apply(&v, &mut av);
            let a: f64 = u.iter().zip(&av).map(|(x, y)| x * y).sum();
            let b: f64 = au.iter().zip(&v).map(|(x, y)| x * y).sum();
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
        worst
    }

    /// Nodal values `M^{-1/2} y`, normalized in the operator's own weights.
    pub fn nodal(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.mass)
            .map(|(v, m)| v / m.sqrt())
            .collect()
    }

    /// Sector wavefunction of a reduced eigenvector. For the equivariant
    /// reductions this is `sqrt(n!)` times the full-space function on the
    /// identity region, so all three formulations share one normalization.
    pub fn sector_wavefunction(&self, y: &[f64]) -> Result<WavefunctionGrid, SpectralError> {
        if self.layout != Layout::Reduced {
            return Err(SpectralError::InvalidRequest(
                "sector wavefunctions come from reduced operators".into(),
            ));
        }
        let values: Vec<f64> = (0..self.grid.len())
            .map(|i| y[i] / self.grid.weight(i).sqrt())
            .collect();
        Ok(WavefunctionGrid::sector_real(self.grid.clone(), &values)?)
    }

    /// Full-space wavefunction of an eigenvector, in the region-copy layout.
    pub fn full_wavefunction(
        &self,
        y: &[f64],
        stat: Option<Statistics>,
    ) -> Result<WavefunctionGrid, SpectralError> {
        let n = self.grid.n();
        match &self.layout {
            Layout::Reduced => {
                let psi = self.sector_wavefunction(y)?;
                let stat = stat.ok_or_else(|| {
                    SpectralError::InvalidRequest(
                        "reduced operators need a statistics to extend".into(),
                    )
                })?;
                Ok(crate::statistics::extend(&psi, stat)?)
            }
            Layout::Unfolded => {
                let values = self.nodal(y).into_iter().map(|v| v.into()).collect();
                Ok(WavefunctionGrid::full(self.grid.clone(), stat, values)?)
            }
            Layout::FullGrid { ranks } => {
                let dom = self.grid.domain();
                let mut lookup = vec![usize::MAX; dom.full_node_count()];
                for (k, &r) in ranks.iter().enumerate() {
                    lookup[r] = k;
                }
                let nodal = self.nodal(y);
                let grid = self.grid.clone();
                let group = enumerate_group(n, Parity::All).expect("capped");
                let m = grid.len();
                let mut values = Vec::with_capacity(m * group.len());
                for sigma in &group {
                    let inv = sigma.inverse();
                    for i in 0..m {
                        let x = inv.apply(grid.node(i));
                        let k = lookup[dom.rank(&x)];
                        values.push(if k == usize::MAX { 0.0 } else { nodal[k] }.into());
                    }
                }
                Ok(WavefunctionGrid::full(grid, stat, values)?)
            }
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn for_nodes<T: Send, F: Fn(usize) -> T + Sync + Send>(count: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

fn sorted_desc(x: &[u32]) -> Vec<u32> {
    let mut s = x.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

/// Kinetic, wall and confinement part of a cut-cell row at sector node `i`.
/// Returns the diagonal and the off-diagonal entries by sector index.
fn bulk_row(grid: &SectorGrid, i: usize) -> (f64, Vec<(usize, f64)>) {
    let dom = grid.domain();
    let n = dom.n;
    let h = dom.spacing();
    let c0 = 0.5 * h.powi(n as i32 - 2);
    let s = grid.node(i);
    let mut diag = 0.0;
    let mut off = Vec::with_capacity(2 * n);
    let mut t = s.to_vec();
    for q in 0..n {
        for up in [true, false] {
            let ff = face_fraction(s, q, up);
            if ff == 0.0 {
                continue;
            }
            let c = c0 * ff;
            let inside = if up {
                (s[q] as usize) + 1 < dom.cells
            } else {
                s[q] > 0
            };
            if !inside {
                // wall half a cell away: ghost value -ψ
                diag += 2.0 * c;
                continue;
            }
            t[q] = if up { s[q] + 1 } else { s[q] - 1 };
            match grid.index_of(&t) {
                Some(k) => {
                    diag += c;
                    off.push((k, -c));
                }
                // hard-core neighbour: zero value on that node
                None => diag += c,
            }
            t[q] = s[q];
        }
    }
    diag += grid.weight(i) * dom.potential(&grid.coords(i));
    (diag, off)
}

/// Sum over the ties of node `i` of `f(j, a_j, interface fraction)`.
fn tie_sum(
    grid: &SectorGrid,
    model: &CouplingModel,
    i: usize,
    mut f: impl FnMut(usize, FaceParameter, f64),
) {
    let s = grid.node(i);
    let x = grid.coords(i);
    for j in 0..grid.n() - 1 {
        if s[j] == s[j + 1] {
            f(j, model.face_parameter(j, &x), interface_fraction(s, j));
        }
    }
}

fn check_domain(dom: &DomainSpec, model: &CouplingModel) -> Result<(), SpectralError> {
    if model.n() != dom.n {
        return Err(SpectralError::InvalidDomain(format!(
            "coupling model has {} faces, domain has n = {}",
            model.n() - 1,
            dom.n
        )));
    }
    Ok(())
}

/// Free Hamiltonian on the sector with Robin conditions on the faces.
pub fn build_sector(
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    check_domain(dom, model)?;
    let grid = Arc::new(SectorGrid::new(dom, model)?);
    let h = dom.spacing();
    let cr = 0.5 * h.powi(dom.n as i32 - 1);
    let rows = for_nodes(grid.len(), |i| {
        let (mut diag, mut row) = bulk_row(&grid, i);
        tie_sum(&grid, model, i, |_, p, frac| {
            diag += cr * frac * p.inverse_length().expect("hard-core nodes are removed");
        });
        row.push((i, diag));
        row
    });
    let mass = (0..grid.len()).map(|i| grid.weight(i)).collect();
    Ok(GridOperator::assemble(
        Formulation::Sector,
        model,
        grid,
        Layout::Reduced,
        rows,
        mass,
    ))
}

/// Contact potential of a full-grid node with sorted index vector `s`, in
/// units of `1/h`: every tied pair of a block carries the block's mean `1/a`.
fn delta_strength(dom: &DomainSpec, model: &CouplingModel, s: &[u32]) -> f64 {
    let x = dom.coords(s);
    let mut total = 0.0;
    let mut q = 0;
    while q < s.len() {
        let (start, len) = block_of(s, q);
        if len > 1 {
            let mean: f64 = (start..start + len - 1)
                .map(|j| {
                    model
                        .face_parameter(j, &x)
                        .inverse_length()
                        .expect("no hard core here")
                })
                .sum::<f64>()
                / (len - 1) as f64;
            let pairs = (len * (len - 1) / 2) as f64;
            total += pairs * mean;
        }
        q += len;
    }
    total / dom.spacing()
}

fn full_row(
    dom: &DomainSpec,
    model: &CouplingModel,
    x: &[u32],
    mut emit: impl FnMut(&[u32], f64),
) -> f64 {
    let n = dom.n;
    let h = dom.spacing();
    let c = 0.5 * h.powi(n as i32 - 2);
    let mut diag = 0.0;
    let mut v = x.to_vec();
    for p in 0..n {
        for up in [true, false] {
            let inside = if up {
                (x[p] as usize) + 1 < dom.cells
            } else {
                x[p] > 0
            };
            if !inside {
                diag += 2.0 * c;
                continue;
            }
            v[p] = if up { x[p] + 1 } else { x[p] - 1 };
            diag += c;
            if !is_hard_core(dom, model, &v) {
                emit(&v, -c);
            }
            v[p] = x[p];
        }
    }
    let s = sorted_desc(x);
    diag += h.powi(n as i32) * (delta_strength(dom, model, &s) + dom.potential(&dom.coords(x)));
    diag
}

fn check_delta(model: &CouplingModel, allow_hard_core: bool) -> Result<(), SpectralError> {
    if !allow_hard_core && model.any(|c| matches!(c, Coupling::Dirichlet)) {
        return Err(SpectralError::UnsupportedCoupling(
            "Dirichlet sentinel not valid for delta builder".into(),
        ));
    }
    Ok(())
}

fn bose_reduced(
    dom: &DomainSpec,
    model: &CouplingModel,
    formulation: Formulation,
) -> Result<GridOperator, SpectralError> {
    check_domain(dom, model)?;
    let grid = Arc::new(SectorGrid::new(dom, model)?);
    let rows = for_nodes(grid.len(), |i| {
        let s = grid.node(i);
        let os = orbit_size(s) as f64;
        let mut row = Vec::with_capacity(2 * dom.n + 1);
        let diag = full_row(dom, model, s, |v, val| {
            let t = sorted_desc(v);
            let k = grid.index_of(&t).expect("neighbour orbit is in the grid");
            row.push((k, val * (os / orbit_size(&t) as f64).sqrt()));
        });
        row.push((i, diag));
        row
    });
    let hn = dom.spacing().powi(dom.n as i32);
    let mass = vec![hn; grid.len()];
    Ok(GridOperator::assemble(
        formulation,
        model,
        grid,
        Layout::Reduced,
        rows,
        mass,
    ))
}

/// Bosons with pairwise δ interactions of strength `1/a_j`, on the
/// symmetric subspace of the full grid.
pub fn build_delta_bose(
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    check_delta(model, false)?;
    bose_reduced(dom, model, Formulation::DeltaBose)
}

/// Impenetrable bosons: the δ model with tied nodes of Dirichlet faces
/// removed from the full grid.
pub fn build_hard_core_bose(
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    bose_reduced(dom, model, Formulation::HardCoreBose)
}

/// The δ model on every node of the full grid, without symmetry reduction.
pub fn build_delta_bose_full(
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    check_domain(dom, model)?;
    let grid = Arc::new(SectorGrid::new(dom, model)?);
    let total = dom.full_node_count();
    let mut lookup = vec![usize::MAX; total];
    let mut ranks = Vec::new();
    let mut x = vec![0u32; dom.n];
    for r in 0..total {
        dom.unrank(r, &mut x);
        if !is_hard_core(dom, model, &x) {
            lookup[r] = ranks.len();
            ranks.push(r);
        }
    }
    let formulation = if model.any(|c| matches!(c, Coupling::Dirichlet)) {
        Formulation::HardCoreBose
    } else {
        Formulation::DeltaBose
    };
    let rows = for_nodes(ranks.len(), |k| {
        let mut x = vec![0u32; dom.n];
        dom.unrank(ranks[k], &mut x);
        let mut row = Vec::with_capacity(2 * dom.n + 1);
        let diag = full_row(dom, model, &x, |v, val| {
            row.push((lookup[dom.rank(v)], val))
        });
        row.push((k, diag));
        row
    });
    let hn = dom.spacing().powi(dom.n as i32);
    let mass = vec![hn; ranks.len()];
    Ok(GridOperator::assemble(
        formulation,
        model,
        grid,
        Layout::FullGrid { ranks },
        rows,
        mass,
    ))
}

fn check_epsilon(model: &CouplingModel) -> Result<(), SpectralError> {
    if model.any(|c| matches!(c, Coupling::Neumann)) {
        return Err(SpectralError::UnsupportedCoupling(
            "Neumann sentinel not valid for epsilon builder".into(),
        ));
    }
    Ok(())
}

/// Rows of the unfolded fermion operator for copy `g`, node `i`, with
/// columns as `(copy, sector index)`.
fn unfolded_row(
    grid: &SectorGrid,
    model: &CouplingModel,
    partner: &[Vec<usize>],
    g: usize,
    i: usize,
) -> Vec<((usize, usize), f64)> {
    let h = grid.domain().spacing();
    let cr = 0.5 * h.powi(grid.n() as i32 - 1);
    let (mut diag, off) = bulk_row(grid, i);
    let mut row: Vec<((usize, usize), f64)> = off.into_iter().map(|(k, v)| ((g, k), v)).collect();
    tie_sum(grid, model, i, |j, p, frac| {
        let a = p.length().expect("neumann rejected");
        // resistive layer: ψ jump across the hyperplane over 2a
        let c = cr * frac / (2.0 * a);
        diag += c;
        row.push(((partner[g][j], i), -c));
    });
    row.push(((g, i), diag));
    row
}

/// Copy index across face `j` from copy `g`: `σ' = τ_j σ_g`.
fn partner_table(group: &[Permutation], n: usize) -> Vec<Vec<usize>> {
    group
        .iter()
        .map(|sigma| {
            (0..n - 1)
                .map(|j| {
                    let p = Permutation::transposition(n, j, j + 1).compose(sigma);
                    group.iter().position(|x| *x == p).expect("group is closed")
                })
                .collect()
        })
        .collect()
}

/// Fermions with ε interactions of strength `a_j`, on the antisymmetric
/// subspace of the unfolded grid.
pub fn build_epsilon_fermi(
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    check_domain(dom, model)?;
    check_epsilon(model)?;
    let grid = Arc::new(SectorGrid::new(dom, model)?);
    let group = enumerate_group(dom.n, Parity::All).expect("capped");
    let partner = partner_table(&group, dom.n);
    let signs: Vec<f64> = group.iter().map(|p| p.sign() as f64).collect();
    let rows = for_nodes(grid.len(), |i| {
        unfolded_row(&grid, model, &partner, 0, i)
            .into_iter()
            .map(|((g, k), v)| (k, v * signs[g]))
            .collect()
    });
    let mass = (0..grid.len()).map(|i| grid.weight(i)).collect();
    Ok(GridOperator::assemble(
        Formulation::EpsilonFermi,
        model,
        grid,
        Layout::Reduced,
        rows,
        mass,
    ))
}

/// The ε model on all `n!` copies, without symmetry reduction.
pub fn build_epsilon_fermi_unfolded(
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    check_domain(dom, model)?;
    check_epsilon(model)?;
    let grid = Arc::new(SectorGrid::new(dom, model)?);
    let group = enumerate_group(dom.n, Parity::All).expect("capped");
    let partner = partner_table(&group, dom.n);
    let m = grid.len();
    let rows = for_nodes(m * group.len(), |k| {
        unfolded_row(&grid, model, &partner, k / m, k % m)
            .into_iter()
            .map(|((g, i), v)| (g * m + i, v))
            .collect()
    });
    let mass = (0..m * group.len()).map(|k| grid.weight(k % m)).collect();
    Ok(GridOperator::assemble(
        Formulation::EpsilonFermi,
        model,
        grid,
        Layout::Unfolded,
        rows,
        mass,
    ))
}

/// Dispatch on the formulation.
pub fn build(
    formulation: Formulation,
    dom: &DomainSpec,
    model: &CouplingModel,
) -> Result<GridOperator, SpectralError> {
    match formulation {
        Formulation::Sector => build_sector(dom, model),
        Formulation::DeltaBose => build_delta_bose(dom, model),
        Formulation::HardCoreBose => build_hard_core_bose(dom, model),
        Formulation::EpsilonFermi => build_epsilon_fermi(dom, model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model2(c: Coupling) -> CouplingModel {
        CouplingModel::uniform(2, c)
    }

    #[test]
    fn csr_merges_duplicates() {
        let m = CsrMatrix::from_rows(vec![vec![(1, 1.0), (0, 2.0), (1, 0.5)], vec![(0, 1.5)]]);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.asymmetry(), 0.0);
        let mut y = vec![0.0; 2];
        m.matvec(&[1.0, 2.0], &mut y);
        assert_eq!(y, vec![5.0, 1.5]);
    }

    #[test]
    fn all_formulations_are_symmetric() {
        let dom = DomainSpec::boxed(3, 2.0, 9).unwrap();
        let model = CouplingModel::new(vec![Coupling::Robin(-1.0), Coupling::Robin(-2.0)]).unwrap();
        for op in [
            build_sector(&dom, &model).unwrap(),
            build_delta_bose(&dom, &model).unwrap(),
            build_epsilon_fermi(&dom, &model).unwrap(),
            build_delta_bose_full(&dom, &model).unwrap(),
            build_epsilon_fermi_unfolded(&dom, &model).unwrap(),
        ] {
            assert!(
                op.matrix().asymmetry() < 1e-9 * op.matrix().gershgorin().1,
                "{:?}",
                op.formulation()
            );
            assert!(op.symmetry_defect(3, 7) < 1e-12);
        }
    }

    #[test]
    fn reduced_operators_coincide_entrywise() {
        // the reductions land on the sector matrix, which is the content of
        // the equivalence at the discrete level
        let dom = DomainSpec::boxed(3, 2.0, 9).unwrap();
        let model = CouplingModel::new(vec![Coupling::Robin(-1.0), Coupling::Robin(0.5)]).unwrap();
        let s = build_sector(&dom, &model).unwrap();
        let b = build_delta_bose(&dom, &model).unwrap();
        let f = build_epsilon_fermi(&dom, &model).unwrap();
        for i in 0..s.dim() {
            for (j, v) in s.matrix().row(i) {
                assert!(
                    (b.matrix().get(i, j) - v).abs() < 1e-10 * v.abs().max(1.0),
                    "bose {i} {j}"
                );
                assert!(
                    (f.matrix().get(i, j) - v).abs() < 1e-10 * v.abs().max(1.0),
                    "fermi {i} {j}"
                );
            }
        }
    }

    #[test]
    fn sentinels_are_rejected_by_the_matching_builder() {
        let dom = DomainSpec::boxed(2, 1.0, 10).unwrap();
        let err = build_delta_bose(&dom, &model2(Coupling::Dirichlet)).unwrap_err();
        assert_eq!(
            err.to_string(),
            "unsupported coupling: Dirichlet sentinel not valid for delta builder"
        );
        assert!(build_epsilon_fermi(&dom, &model2(Coupling::Neumann)).is_err());
        assert!(build_hard_core_bose(&dom, &model2(Coupling::Dirichlet)).is_ok());
        assert!(build_epsilon_fermi(&dom, &model2(Coupling::Dirichlet)).is_ok());
    }

    #[test]
    fn neumann_sector_is_the_folded_free_laplacian() {
        let dom = DomainSpec::boxed(2, 1.0, 6).unwrap();
        let op = build_sector(&dom, &model2(Coupling::Neumann)).unwrap();
        let lo = nalgebra::SymmetricEigen::new(op.matrix().to_dense())
            .eigenvalues
            .min();
        assert!(lo > 0.0);
        // the constant function has Rayleigh quotient equal to the wall terms only
        let y: Vec<f64> = op.mass().iter().map(|m| m.sqrt()).collect();
        let mut ay = vec![0.0; y.len()];
        op.apply(&y, &mut ay);
        let rq: f64 = y.iter().zip(&ay).map(|(a, b)| a * b).sum::<f64>()
            / y.iter().map(|a| a * a).sum::<f64>();
        let h = dom.spacing();
        // each particle loses 2 · (½ · 2/h²) · h per unit length at the two walls
        assert!((rq - 2.0 * 2.0 / (h * dom.length())).abs() < 1e-10, "{rq}");
    }
}
