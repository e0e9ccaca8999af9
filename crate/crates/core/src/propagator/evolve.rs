use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kernels::permutation_sum;
use super::{KernelCoupling, KernelEvaluator, PropagatorError};
use crate::boundary::{Coupling, CouplingModel};
use crate::config_space::{enumerate_group, vandermonde_sign, Parity};
use crate::quadrature::{integrate_nested, NestedRegion, QuadratureError, QuadratureOptions};
use crate::spectral::{
    build_delta_bose_full, build_epsilon_fermi_unfolded, build_sector, expm_action, solve,
    DomainSpec, Layout, SectorGrid, SolverOptions,
};
use crate::statistics::{character, Space, Statistics, WavefunctionGrid};

/// A sector state in closed form, negligible outside the cube
/// `[lo, hi]^n`.
#[derive(Clone)]
pub struct InitialState {
    n: usize,
    lo: f64,
    hi: f64,
    label: String,
    /// Rough peak magnitude, for absolute quadrature tolerances.
    peak: f64,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "InitialState({}, [{}, {}]^{})",
            self.label, self.lo, self.hi, self.n
        )
    }
}

impl InitialState {
    pub fn new<F>(n: usize, lo: f64, hi: f64, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let mut peak = 0.0f64;
        let mut idx = vec![0usize; n];
        let mut y = vec![0.0; n];
        // coarse lattice scan of the support
        'scan: loop {
            for (c, &i) in y.iter_mut().zip(&idx) {
                *c = lo + (hi - lo) * (i as f64 + 0.5) / 16.0;
            }
            peak = peak.max(f(&y).abs());
            for k in 0..n {
                idx[k] += 1;
                if idx[k] < 16 {
                    continue 'scan;
                }
                idx[k] = 0;
            }
            break;
        }
        Self {
            n,
            lo,
            hi,
            label: label.into(),
            peak: peak.max(f64::MIN_POSITIVE),
            eval: Arc::new(f),
        }
    }

    /// `exp(-|y - c|²/(2w²))` with a linear tilt, so that the state is
    /// not an eigenfunction of anything in sight.
    pub fn gaussian(centre: &[f64], width: f64) -> Self {
        let c = centre.to_vec();
        let reach = 9.0 * width;
        let lo = c.iter().fold(f64::INFINITY, |m, v| m.min(*v)) - reach;
        let hi = c.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) + reach;
        let w2 = width * width;
        Self::new(c.len(), lo, hi, format!("gaussian(w={width})"), move |y| {
            let mut r2 = 0.0;
            let mut tilt = 1.0;
            for (k, (a, b)) in y.iter().zip(&c).enumerate() {
                r2 += (a - b) * (a - b);
                tilt += 0.15 * (k as f64 + 1.0) * (a - b);
            }
            (-0.5 * r2 / w2).exp() * tilt
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    /// Value of the equivariant extension at an arbitrary point.
    fn extended(&self, z: &[f64], stat: Statistics) -> f64 {
        let mut sorted = [0.0f64; 8];
        let s = &mut sorted[..z.len()];
        s.copy_from_slice(z);
        s.sort_by(|a, b| b.total_cmp(a));
        let sign = match stat {
            Statistics::Bose => 1.0,
            Statistics::Fermi => vandermonde_sign(z).unwrap_or(0) as f64,
        };
        sign * self.eval(s)
    }
}

struct Cube {
    lo: Vec<f64>,
    hi: Vec<f64>,
    ordered: bool,
}

impl NestedRegion for Cube {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn limits(&self, k: usize, outer: &[f64]) -> (f64, f64) {
        let mut hi = self.hi[k];
        if self.ordered && k > 0 {
            hi = hi.min(outer[k - 1]);
        }
        (self.lo[k], hi.max(self.lo[k]))
    }
    fn breakpoints(&self, _k: usize, outer: &[f64], out: &mut Vec<f64>) {
        if !self.ordered {
            out.extend_from_slice(outer);
        }
    }
}

fn cube(n: usize, lo: f64, hi: f64, ordered: bool) -> Cube {
    Cube {
        lo: vec![lo; n],
        hi: vec![hi; n],
        ordered,
    }
}

fn options(tol: f64, scale: f64) -> QuadratureOptions {
    QuadratureOptions {
        rel_tol: tol,
        abs_tol: 1e-3 * tol * scale,
        max_subdivisions: 4000,
    }
}

/// Support of `ψ₀` cut down to where `K(x, ·; τ)` is not negligible.
fn window(k: &KernelEvaluator, psi0: &InitialState, x: &[f64], tau: f64, ordered: bool) -> Cube {
    let r = k.reach(tau);
    Cube {
        lo: x.iter().map(|c| psi0.lo.max(c - r)).collect(),
        hi: x.iter().map(|c| psi0.hi.min(c + r)).collect(),
        ordered,
    }
}

/// Sector route: `∫_M K_M(x, y; τ) ψ₀(y) dy`.
fn sector_route(
    km: &KernelEvaluator,
    psi0: &InitialState,
    x: &[f64],
    tau: f64,
    tol: f64,
) -> Result<f64, QuadratureError> {
    let region = window(km, psi0, x, tau, true);
    let e = integrate_nested(
        &region,
        |y| km.evaluate(x, y, tau) * psi0.eval(y),
        &options(tol, psi0.peak),
    )?;
    Ok(e.value)
}

/// Equivariant route: extend `ψ₀`, integrate against the full-space kernel.
/// The kernel may reach every ordering region, so the window is the
/// symmetrized one.
fn full_route(
    k: &KernelEvaluator,
    stat: Statistics,
    psi0: &InitialState,
    x: &[f64],
    tau: f64,
    tol: f64,
) -> Result<f64, QuadratureError> {
    let r = k.reach(tau);
    let lo = x.iter().fold(f64::INFINITY, |m, c| m.min(*c)) - r;
    let hi = x.iter().fold(f64::NEG_INFINITY, |m, c| m.max(*c)) + r;
    let region = cube(psi0.n, psi0.lo.max(lo), psi0.hi.min(hi), false);
    Ok(integrate_nested(
        &region,
        |z| k.evaluate(x, z, tau) * psi0.extended(z, stat),
        &options(tol, psi0.peak),
    )?
    .value)
}

/// `ψ(x, τ) = ∫_M K_M(x, y; τ) ψ₀(y) dy` at every node of `grid`.
pub fn propagate(
    km: &KernelEvaluator,
    psi0: &InitialState,
    grid: Arc<SectorGrid>,
    tau: f64,
    tol: f64,
) -> Result<WavefunctionGrid, PropagatorError> {
    check(km, psi0, tau)?;
    if grid.n() != km.n() {
        return Err(PropagatorError::InvalidRequest(
            "grid and kernel disagree on n".into(),
        ));
    }
    let values = (0..grid.len())
        .map(|i| sector_route(km, psi0, &grid.coords(i), tau, tol))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(WavefunctionGrid::sector_real(grid, &values)?)
}

fn check(km: &KernelEvaluator, psi0: &InitialState, tau: f64) -> Result<(), PropagatorError> {
    if km.space() != Space::Sector {
        return Err(PropagatorError::InvalidRequest(
            "propagation takes a sector kernel".into(),
        ));
    }
    if psi0.n != km.n() {
        return Err(PropagatorError::InvalidRequest(
            "state and kernel disagree on n".into(),
        ));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PropagatorError::InvalidRequest(format!(
            "imaginary time {tau} must be positive"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSpec {
    pub tau: f64,
    /// The semigroup check splits `τ` as `split·τ + (1 - split)·τ`.
    pub split: f64,
    /// Grid nodes at which the routes are compared.
    pub nodes: usize,
    /// Nodes used for the (nested, costly) semigroup check.
    pub semigroup_nodes: usize,
    pub quad_tol: f64,
    /// Outer tolerance of the semigroup check; the inner field is computed
    /// a hundred times tighter.
    pub semigroup_tol: f64,
}

impl Default for PropagationSpec {
    fn default() -> Self {
        Self {
            tau: 0.3,
            split: 0.4,
            nodes: 8,
            semigroup_nodes: 1,
            quad_tol: 1e-10,
            semigroup_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub kernel: String,
    pub state: String,
    pub tau: f64,
    pub nodes: usize,
    /// Sector route against equivariant route, relative to the largest value.
    pub route_deviation: f64,
    /// Two steps against one, relative to the largest value.
    pub semigroup_deviation: f64,
    /// Matrix exponential of the grid Hamiltonian against the sector route;
    /// discretization-limited.
    pub grid_deviation: f64,
}

fn sample_nodes(grid: &SectorGrid, psi0: &InitialState, count: usize) -> Vec<Vec<f64>> {
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.coords(i).iter().all(|&c| c > psi0.lo && c < psi0.hi))
        .collect();
    let pool = if inside.is_empty() {
        (0..grid.len()).collect()
    } else {
        inside
    };
    let step = (pool.len() / count.max(1)).max(1);
    pool.iter()
        .step_by(step)
        .take(count)
        .map(|&i| grid.coords(i))
        .collect()
}

fn model_of(k: &KernelEvaluator, stat: Statistics) -> CouplingModel {
    match k.coupling() {
        KernelCoupling::Model(m) => m.clone(),
        KernelCoupling::Free => CouplingModel::uniform(
            k.n(),
            if stat == Statistics::Bose {
                Coupling::Neumann
            } else {
                Coupling::Dirichlet
            },
        ),
    }
}

/// Cross-validate propagation of `psi0` by the permutation-sum kernel of `k`:
/// the sector and equivariant quadrature routes, the semigroup law, and the
/// matrix exponential of the grid Hamiltonian on `dom`.
pub fn propagation_report(
    k: &KernelEvaluator,
    stat: Statistics,
    psi0: &InitialState,
    dom: &DomainSpec,
    spec: &PropagationSpec,
) -> Result<PropagationReport, PropagatorError> {
    let km = permutation_sum(k, stat)?;
    check(&km, psi0, spec.tau)?;
    let model = model_of(k, stat);
    let op = build_sector(dom, &model)?;
    let grid = op.grid().clone();
    let points = sample_nodes(&grid, psi0, spec.nodes);
    let tau = spec.tau;

    let mut sector = Vec::with_capacity(points.len());
    let mut route = 0.0f64;
    for x in &points {
        let a = sector_route(&km, psi0, x, tau, spec.quad_tol)?;
        let b = full_route(k, stat, psi0, x, tau, spec.quad_tol)?;
        route = route.max((a - b).abs());
        sector.push(a);
    }
    let peak = sector
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);

    // two steps: inner field at τ₁, outer kernel at τ₂
    let (t1, t2) = (spec.split * tau, (1.0 - spec.split) * tau);
    let mut semigroup = 0.0f64;
    for (x, direct) in points.iter().zip(&sector).take(spec.semigroup_nodes) {
        let r1 = km.reach(t1);
        let r2 = km.reach(t2);
        let region = Cube {
            lo: x.iter().map(|c| (psi0.lo - r1).max(c - r2)).collect(),
            hi: x.iter().map(|c| (psi0.hi + r1).min(c + r2)).collect(),
            ordered: true,
        };
        let failure = RefCell::new(None);
        let outer = integrate_nested(
            &region,
            |z| {
                if failure.borrow().is_some() {
                    return 0.0;
                }
                match sector_route(&km, psi0, z, t1, 1e-2 * spec.semigroup_tol) {
                    Ok(v) => km.evaluate(x, z, t2) * v,
                    Err(e) => {
                        *failure.borrow_mut() = Some(e);
                        0.0
                    }
                }
            },
            &QuadratureOptions {
                rel_tol: spec.semigroup_tol,
                abs_tol: 1e-2 * spec.semigroup_tol * peak,
                max_subdivisions: 4000,
            },
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e.into());
        }
        semigroup = semigroup.max((outer.value - direct).abs());
    }

    // grid Hamiltonian: y = M^{1/2} ψ
    let w: Vec<f64> = (0..grid.len()).map(|i| grid.weight(i)).collect();
    let y0: Vec<f64> = (0..grid.len())
        .map(|i| psi0.eval(&grid.coords(i)) * w[i].sqrt())
        .collect();
    let yt = expm_action(&op, &y0, tau, 1e-12)?;
    let mut grid_dev = 0.0f64;
    for (x, a) in points.iter().zip(&sector) {
        let h = dom.spacing();
        let idx: Vec<u32> = x
            .iter()
            .map(|c| ((c - dom.lower()) / h - 0.5).round() as u32)
            .collect();
        if let Some(i) = grid.index_of(&idx) {
            grid_dev = grid_dev.max((yt[i] / w[i].sqrt() - a).abs());
        }
    }

    Ok(PropagationReport {
        kernel: km.label().to_string(),
        state: psi0.label.clone(),
        tau,
        nodes: points.len(),
        route_deviation: route / peak,
        semigroup_deviation: semigroup / peak,
        grid_deviation: grid_dev / peak,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateProjection {
    pub tau: f64,
    pub ground_energy: f64,
    pub gap: f64,
    /// `|⟨ψ(τ), φ₀⟩|` for unit vectors.
    pub overlap: f64,
}

/// Long imaginary-time evolution of `psi0` on the grid Hamiltonian, compared
/// with the ground state from the eigensolver. `tau = None` picks `24/gap`.
pub fn ground_state_projection(
    dom: &DomainSpec,
    model: &CouplingModel,
    psi0: &InitialState,
    tau: Option<f64>,
) -> Result<GroundStateProjection, PropagatorError> {
    let op = build_sector(dom, model)?;
    let grid = op.grid();
    let spec = solve(&op, 2, &SolverOptions::default())?;
    let gap = spec.eigenvalues[1] - spec.eigenvalues[0];
    let tau = tau.unwrap_or(24.0 / gap.max(1e-6));
    let y0: Vec<f64> = (0..grid.len())
        .map(|i| psi0.eval(&grid.coords(i)) * grid.weight(i).sqrt())
        .collect();
    // renormalize between chunks so long times neither under- nor overflow
    let chunks = (tau * spec.eigenvalues[0].abs().max(gap) / 20.0)
        .ceil()
        .max(1.0) as usize;
    let mut yt = y0;
    for _ in 0..chunks {
        yt = expm_action(&op, &yt, tau / chunks as f64, 1e-12)?;
        let nrm = yt.iter().map(|v| v * v).sum::<f64>().sqrt();
        yt.iter_mut().for_each(|v| *v /= nrm);
    }
    let ground = &spec.vectors.as_ref().expect("vectors kept")[0];
    let nrm = yt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let overlap = yt.iter().zip(ground).map(|(a, b)| a * b).sum::<f64>().abs() / nrm;
    Ok(GroundStateProjection {
        tau,
        ground_energy: spec.eigenvalues[0],
        gap,
        overlap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealTimeReport {
    pub t: f64,
    pub sector_dimension: usize,
    /// Largest entry gap between `Σ K_B(s, σs')` and the sector kernel,
    /// relative to the largest sector-kernel entry.
    pub bose_deviation: f64,
    /// Same for `Σ sgn(σ) K_F(s, σs')`.
    pub fermi_deviation: f64,
}

/// `exp(-i S t)` of a symmetric matrix.
fn unitary(s: DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(s);
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t));
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * phases[j]);
    scaled * v.transpose()
}

const REAL_TIME_DIM_CAP: usize = 4000;

/// Real-time propagators as finite matrices: the sector kernel against the
/// character-weighted sums of the unreduced boson and fermion kernels.
pub fn real_time_cross_check(
    dom: &DomainSpec,
    model: &CouplingModel,
    t: f64,
) -> Result<RealTimeReport, PropagatorError> {
    let sector = build_sector(dom, model)?;
    let bose = build_delta_bose_full(dom, model)?;
    let fermi = build_epsilon_fermi_unfolded(dom, model)?;
    if bose.dim().max(fermi.dim()) > REAL_TIME_DIM_CAP {
        return Err(PropagatorError::InvalidRequest(format!(
            "dense real-time check capped at dimension {REAL_TIME_DIM_CAP}"
        )));
    }
    let grid = sector.grid().clone();
    let m = grid.len();
    let n = dom.n;
    let hn = dom.spacing().powi(n as i32);
    let w: Vec<f64> = (0..m).map(|i| grid.weight(i)).collect();
    let group = enumerate_group(n, Parity::All).map_err(PropagatorError::CapExceeded)?;
    let identity = group
        .iter()
        .position(|g| g.is_identity())
        .expect("identity present");

    let es = unitary(sector.matrix().to_dense(), t);
    let eb = unitary(bose.matrix().to_dense(), t);
    let ef = unitary(fermi.matrix().to_dense(), t);
    let Layout::FullGrid { ranks } = bose.layout() else {
        return Err(PropagatorError::InvalidRequest(
            "boson operator is not on the full grid".into(),
        ));
    };
    let mut lookup = std::collections::HashMap::with_capacity(ranks.len());
    for (k, &r) in ranks.iter().enumerate() {
        lookup.insert(r, k);
    }
    let copy_of_inverse: Vec<usize> = group
        .iter()
        .map(|s| {
            let inv = s.inverse();
            group
                .iter()
                .position(|g| *g == inv)
                .expect("group is closed")
        })
        .collect();

    let mut peak = 0.0f64;
    let mut db = 0.0f64;
    let mut df = 0.0f64;
    for i in 0..m {
        let ki = lookup[&dom.rank(grid.node(i))];
        for j in 0..m {
            let km = es[(i, j)] / (w[i] * w[j]).sqrt();
            peak = peak.max(km.norm());
            let mut sb = Complex64::new(0.0, 0.0);
            let mut sf = Complex64::new(0.0, 0.0);
            for (g, sigma) in group.iter().enumerate() {
                let moved = sigma.apply(grid.node(j));
                if let Some(&kj) = lookup.get(&dom.rank(&moved)) {
                    sb += eb[(ki, kj)] / hn;
                }
                let col = copy_of_inverse[g] * m + j;
                sf += ef[(identity * m + i, col)] * character(Statistics::Fermi, sigma) as f64
                    / (w[i] * w[j]).sqrt();
            }
            db = db.max((sb - km).norm());
            df = df.max((sf - km).norm());
        }
    }
    Ok(RealTimeReport {
        t,
        sector_dimension: m,
        bose_deviation: db / peak,
        fermi_deviation: df / peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{delta_pair_kernel, free_kernel};

    #[test]
    fn real_time_sums_match_sector() {
        let dom = DomainSpec::boxed(2, 4.0, 10).unwrap();
        let model = CouplingModel::uniform(2, Coupling::Robin(-1.0));
        let r = real_time_cross_check(&dom, &model, 0.1).unwrap();
        assert!(r.bose_deviation < 1e-10, "{r:?}");
        assert!(r.fermi_deviation < 1e-10, "{r:?}");
    }

    #[test]
    fn routes_agree_for_free_fermions() {
        let dom = DomainSpec::boxed(2, 8.0, 16).unwrap();
        let psi0 = InitialState::gaussian(&[0.8, -0.6], 0.5);
        let spec = PropagationSpec {
            nodes: 3,
            semigroup_tol: 1e-4,
            ..Default::default()
        };
        let r = propagation_report(&free_kernel(2), Statistics::Fermi, &psi0, &dom, &spec).unwrap();
        assert!(r.route_deviation < 1e-8, "{r:?}");
        assert!(r.semigroup_deviation < 1e-7, "{r:?}");
    }

    #[test]
    fn routes_agree_for_delta_bosons() {
        let dom = DomainSpec::boxed(2, 8.0, 16).unwrap();
        let psi0 = InitialState::gaussian(&[0.8, -0.6], 0.5);
        let k = delta_pair_kernel(2, Coupling::Robin(-1.0)).unwrap();
        let spec = PropagationSpec {
            nodes: 3,
            semigroup_tol: 1e-4,
            ..Default::default()
        };
        let r = propagation_report(&k, Statistics::Bose, &psi0, &dom, &spec).unwrap();
        assert!(r.route_deviation < 1e-8, "{r:?}");
        assert!(r.semigroup_deviation < 1e-7, "{r:?}");
    }
}
