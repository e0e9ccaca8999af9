use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{permutation_sum, robin_relative_kernel};
use super::{KernelCoupling, KernelEvaluator, PropagatorError};
use crate::boundary::{
    connection_residual_fn, one_sided_face_data, ConnectionKind, Coupling, CouplingModel,
    FaceParameter,
};
use crate::config_space::{enumerate_group, Parity};
use crate::quadrature::{integrate_nested, NestedRegion, QuadratureOptions};
use crate::statistics::{Space, Statistics};

/// Where and how densely the kernel checks sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    /// Random `(x, y)` pairs per check.
    pub points: usize,
    pub seed: u64,
    /// Coordinates are drawn from `[-spread, spread]`.
    pub spread: f64,
    /// Minimum distance between any two coordinates of a sample.
    pub min_gap: f64,
    pub tau: f64,
    /// `(τ₁, τ₂)` for the composition law.
    pub composition_tau: (f64, f64),
    /// Imaginary times for the initial-condition test, decreasing.
    pub tau_ladder: Vec<f64>,
    /// Spatial step of the heat-equation differences.
    pub fd_step: f64,
    /// Step of the one-sided face stencils.
    pub boundary_step: f64,
    /// Relative tolerance of the adaptive quadrature.
    pub quad_tol: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            points: 4,
            seed: 7,
            spread: 1.0,
            min_gap: 0.3,
            tau: 0.5,
            composition_tau: (0.3, 0.4),
            tau_ladder: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            fd_step: 1e-2,
            boundary_step: 2e-3,
            quad_tol: 1e-9,
        }
    }
}

impl SamplingSpec {
    /// Defaults with the quadrature tolerance and sample count scaled to the
    /// dimension.
    pub fn for_dimension(n: usize) -> Self {
        let mut s = Self::default();
        if n >= 3 {
            s.quad_tol = 1e-6;
            s.points = 2;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub tau: f64,
    pub residual: f64,
}

/// Residuals of the full-space assumptions, each relative to the kernel's
/// diagonal scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub kernel: String,
    pub n: usize,
    pub composition: f64,
    pub initial_condition: Vec<LadderRung>,
    pub symmetry: f64,
    pub heat_equation: f64,
    pub permutation_invariance: f64,
}

impl AssumptionReport {
    pub fn worst(&self) -> f64 {
        [
            self.composition,
            last_rung(&self.initial_condition),
            self.symmetry,
            self.heat_equation,
            self.permutation_invariance,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Residuals of the five sector properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorPropertyReport {
    pub kernel: String,
    pub n: usize,
    pub composition: f64,
    pub initial_condition: Vec<LadderRung>,
    pub symmetry: f64,
    pub heat_equation: f64,
    /// Robin residual of the model on every face.
    pub boundary: f64,
    /// Largest `|K|` on a face.
    pub face_value: f64,
    /// Largest normal derivative on a face.
    pub normal_derivative: f64,
}

impl SectorPropertyReport {
    pub fn worst(&self) -> f64 {
        [
            self.composition,
            last_rung(&self.initial_condition),
            self.symmetry,
            self.heat_equation,
            self.boundary,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn last_rung(l: &[LadderRung]) -> f64 {
    l.last().map_or(0.0, |r| r.residual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub bose_kernel: String,
    pub fermi_kernel: String,
    /// Largest `|Σχ_B K_B − Σχ_F K_F|` relative to the diagonal scale.
    pub max_deviation: f64,
    pub bose_connection: f64,
    pub fermi_connection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeCheck {
    pub coupling: String,
    pub source: f64,
    pub tau0: f64,
    pub tau1: f64,
    /// Largest deviation from the heat solve, relative to the peak.
    pub max_deviation: f64,
}

/// Box, optionally intersected with the ordered region, with inner
/// coordinates split where they meet outer ones.
struct Window {
    lo: Vec<f64>,
    hi: Vec<f64>,
    ordered: bool,
}

impl NestedRegion for Window {
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

fn window(centres: &[&[f64]], reach: f64, ordered: bool) -> Window {
    let n = centres[0].len();
    let lo = (0..n)
        .map(|k| centres.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min) - reach)
        .collect();
    let hi = (0..n)
        .map(|k| {
            centres
                .iter()
                .map(|c| c[k])
                .fold(f64::NEG_INFINITY, f64::max)
                + reach
        })
        .collect();
    Window { lo, hi, ordered }
}

/// A point with every pair of coordinates at least `min_gap` apart.
fn gapped_point(rng: &mut ChaCha8Rng, n: usize, spec: &SamplingSpec, ordered: bool) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-spec.spread..spec.spread))
            .collect();
        let ok = (0..n).all(|i| (i + 1..n).all(|j| (x[i] - x[j]).abs() >= spec.min_gap));
        if ok {
            if ordered {
                x.sort_by(|a, b| b.total_cmp(a));
            }
            return x;
        }
    }
}

/// A point on the hyperplane `x_q = x_{q+1}`, other coordinates gapped.
fn face_point(
    rng: &mut ChaCha8Rng,
    n: usize,
    q: usize,
    spec: &SamplingSpec,
    ordered: bool,
) -> Vec<f64> {
    loop {
        let mut x = gapped_point(rng, n, spec, ordered);
        let mid = 0.5 * (x[q] + x[q + 1]);
        x[q] = mid;
        x[q + 1] = mid;
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| (i == q && j == q + 1) || (x[i] - x[j]).abs() >= spec.min_gap)
        });
        if ok {
            return x;
        }
    }
}

fn quad_opts(spec: &SamplingSpec, scale: f64) -> QuadratureOptions {
    QuadratureOptions {
        rel_tol: spec.quad_tol,
        abs_tol: 1e-3 * spec.quad_tol * scale.abs(),
        max_subdivisions: 4000,
    }
}

fn diag_scale(k: &KernelEvaluator, y: &[f64], tau: f64) -> f64 {
    k.evaluate(y, y, tau).abs().max(f64::MIN_POSITIVE)
}

fn composition_residual(
    k: &KernelEvaluator,
    x: &[f64],
    y: &[f64],
    spec: &SamplingSpec,
) -> Result<f64, PropagatorError> {
    let (t1, t2) = spec.composition_tau;
    let rhs = k.evaluate(x, y, t1 + t2);
    let scale = diag_scale(k, y, t1 + t2);
    let region = window(&[x, y], k.reach(t1.max(t2)), k.space() == Space::Sector);
    let lhs = integrate_nested(
        &region,
        |z| k.evaluate(x, z, t1) * k.evaluate(z, y, t2),
        &quad_opts(spec, scale),
    )?
    .value;
    Ok((lhs - rhs).abs() / scale)
}

/// Smooth, non-symmetric probe centred near `x`.
fn probe(x: &[f64]) -> impl Fn(&[f64]) -> f64 + '_ {
    move |y: &[f64]| {
        let mut r2 = 0.0;
        let mut tilt = 1.0;
        for (k, (a, b)) in y.iter().zip(x).enumerate() {
            let d = a - b - 0.1 * (k as f64 + 1.0);
            r2 += d * d;
            tilt += 0.2 * (k as f64 + 1.0) * a;
        }
        (-0.5 * r2).exp() * tilt
    }
}

fn initial_condition_ladder(
    k: &KernelEvaluator,
    x: &[f64],
    spec: &SamplingSpec,
) -> Result<Vec<LadderRung>, PropagatorError> {
    let f = probe(x);
    let fx = f(x);
    spec.tau_ladder
        .iter()
        .map(|&tau| {
            let region = window(&[x], k.reach(tau), k.space() == Space::Sector);
            let opts = quad_opts(spec, fx);
            let v = integrate_nested(&region, |y| k.evaluate(x, y, tau) * f(y), &opts)?.value;
            Ok(LadderRung {
                tau,
                residual: (v - fx).abs() / fx.abs(),
            })
        })
        .collect()
}

/// Fourth-order central first and second differences.
fn d1(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

fn d2(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

fn heat_residual(k: &KernelEvaluator, x: &[f64], y: &[f64], spec: &SamplingSpec) -> f64 {
    let tau = spec.tau;
    let dt = d1(|s| k.evaluate(x, y, tau + s), 1e-2 * tau);
    let mut lap = 0.0;
    for q in 0..x.len() {
        lap += d2(
            |s| {
                let mut p = x.to_vec();
                p[q] += s;
                k.evaluate(&p, y, tau)
            },
            spec.fd_step,
        );
    }
    (dt - 0.5 * lap).abs() / (diag_scale(k, y, tau) / tau)
}

/// Composition, initial condition, symmetry, heat equation and permutation
/// invariance of a full-space kernel at sampled points.
pub fn verify_assumptions(
    k: &KernelEvaluator,
    spec: &SamplingSpec,
) -> Result<AssumptionReport, PropagatorError> {
    if k.space() != Space::Full {
        return Err(PropagatorError::InvalidRequest(
            "assumption checks take full-space kernels".into(),
        ));
    }
    let n = k.n();
    let group = enumerate_group(n, Parity::All).map_err(PropagatorError::CapExceeded)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut report = AssumptionReport {
        kernel: k.label().to_string(),
        n,
        composition: 0.0,
        initial_condition: Vec::new(),
        symmetry: 0.0,
        heat_equation: 0.0,
        permutation_invariance: 0.0,
    };
    for sample in 0..spec.points {
        let x = gapped_point(&mut rng, n, spec, false);
        let y = gapped_point(&mut rng, n, spec, false);
        report.composition = report
            .composition
            .max(composition_residual(k, &x, &y, spec)?);
        if sample == 0 {
            report.initial_condition = initial_condition_ladder(k, &x, spec)?;
        }
        let scale = diag_scale(k, &y, spec.tau);
        report.symmetry = report
            .symmetry
            .max((k.evaluate(&x, &y, spec.tau) - k.evaluate(&y, &x, spec.tau)).abs() / scale);
        report.heat_equation = report.heat_equation.max(heat_residual(k, &x, &y, spec));
        let sigma = &group[rng.gen_range(0..group.len())];
        let moved = k.evaluate(&sigma.apply(&x), &sigma.apply(&y), spec.tau);
        report.permutation_invariance = report
            .permutation_invariance
            .max((moved - k.evaluate(&x, &y, spec.tau)).abs() / scale);
    }
    Ok(report)
}

/// The five sector properties, with the boundary property checked against
/// `model` on every face.
pub fn verify_sector_properties(
    k: &KernelEvaluator,
    model: &CouplingModel,
    spec: &SamplingSpec,
) -> Result<SectorPropertyReport, PropagatorError> {
    if k.space() != Space::Sector {
        return Err(PropagatorError::InvalidRequest(
            "sector properties take sector kernels".into(),
        ));
    }
    let n = k.n();
    if model.n() != n {
        return Err(PropagatorError::InvalidRequest(format!(
            "coupling model is for n = {}, kernel has n = {n}",
            model.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut report = SectorPropertyReport {
        kernel: k.label().to_string(),
        n,
        composition: 0.0,
        initial_condition: Vec::new(),
        symmetry: 0.0,
        heat_equation: 0.0,
        boundary: 0.0,
        face_value: 0.0,
        normal_derivative: 0.0,
    };
    let tau = spec.tau;
    for sample in 0..spec.points {
        let x = gapped_point(&mut rng, n, spec, true);
        let y = gapped_point(&mut rng, n, spec, true);
        report.composition = report
            .composition
            .max(composition_residual(k, &x, &y, spec)?);
        if sample == 0 {
            report.initial_condition = initial_condition_ladder(k, &x, spec)?;
        }
        let scale = diag_scale(k, &y, tau);
        report.symmetry = report
            .symmetry
            .max((k.evaluate(&x, &y, tau) - k.evaluate(&y, &x, tau)).abs() / scale);
        report.heat_equation = report.heat_equation.max(heat_residual(k, &x, &y, spec));
        for q in 0..n - 1 {
            let xf = face_point(&mut rng, n, q, spec, true);
            let f = |z: &[f64]| k.evaluate(z, &y, tau);
            let direct = f(&xf);
            let (value, deriv) = one_sided_face_data(&f, &xf, q + 1, true, spec.boundary_step)?;
            let residual = match model.face_parameter(q, &xf).inverse_length() {
                Some(inv) => (deriv - inv * value).abs(),
                None => direct.abs(),
            };
            report.boundary = report.boundary.max(residual / scale);
            report.face_value = report.face_value.max(direct.abs() / scale);
            report.normal_derivative = report.normal_derivative.max(deriv.abs() / scale);
        }
    }
    Ok(report)
}

/// Face data of a kernel for its connection conditions: `None` means hard
/// core.
fn connection_length(k: &KernelEvaluator, q: usize, x: &[f64]) -> Option<f64> {
    let p = match k.coupling() {
        KernelCoupling::Free => {
            return if k.statistics() == Some(Statistics::Bose) {
                Some(f64::INFINITY)
            } else {
                Some(0.0)
            }
        }
        KernelCoupling::Model(m) => m.face_parameter(q, x),
    };
    match p {
        FaceParameter::Robin(a) => Some(a),
        FaceParameter::Neumann => Some(f64::INFINITY),
        FaceParameter::Dirichlet => {
            if k.statistics() == Some(Statistics::Fermi) {
                Some(0.0)
            } else {
                None
            }
        }
    }
}

fn connection_worst(
    k: &KernelEvaluator,
    kind: ConnectionKind,
    spec: &SamplingSpec,
    rng: &mut ChaCha8Rng,
) -> Result<f64, PropagatorError> {
    let n = k.n();
    let tau = spec.tau;
    let mut worst = 0.0f64;
    for _ in 0..spec.points {
        let y = gapped_point(rng, n, spec, false);
        let scale = diag_scale(k, &y, tau);
        for q in 0..n - 1 {
            let x = face_point(rng, n, q, spec, false);
            let f = |z: &[f64]| k.evaluate(z, &y, tau);
            let r = match connection_length(k, q, &x) {
                Some(a) if kind == ConnectionKind::Delta || a.is_finite() => {
                    connection_residual_fn(&f, &x, q + 1, kind, a, spec.boundary_step)?.max()
                }
                Some(_) => {
                    return Err(PropagatorError::InvalidRequest(
                        "epsilon conditions need a finite coupling".into(),
                    ))
                }
                None => {
                    let (fp, _) = one_sided_face_data(&f, &x, q + 1, true, spec.boundary_step)?;
                    let (fm, _) = one_sided_face_data(&f, &x, q + 1, false, spec.boundary_step)?;
                    fp.abs().max(fm.abs())
                }
            };
            worst = worst.max(r / scale);
        }
    }
    Ok(worst)
}

/// Compare the Bose and Fermi permutation sums pointwise, and check each
/// input kernel's connection conditions.
pub fn dual_reconstruction_check(
    kb: &KernelEvaluator,
    kf: &KernelEvaluator,
    spec: &SamplingSpec,
) -> Result<DualReport, PropagatorError> {
    if kb.n() != kf.n() {
        return Err(PropagatorError::InvalidRequest(
            "kernels disagree on n".into(),
        ));
    }
    let n = kb.n();
    let sb = permutation_sum(kb, Statistics::Bose)?;
    let sf = permutation_sum(kf, Statistics::Fermi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut max_deviation = 0.0f64;
    for _ in 0..spec.points.max(1) * 4 {
        let x = gapped_point(&mut rng, n, spec, true);
        let y = gapped_point(&mut rng, n, spec, true);
        let scale = diag_scale(&sb, &y, spec.tau);
        let d = (sb.evaluate(&x, &y, spec.tau) - sf.evaluate(&x, &y, spec.tau)).abs() / scale;
        max_deviation = max_deviation.max(d);
    }
    Ok(DualReport {
        bose_kernel: kb.label().to_string(),
        fermi_kernel: kf.label().to_string(),
        max_deviation,
        bose_connection: connection_worst(kb, ConnectionKind::Delta, spec, &mut rng)?,
        fermi_connection: connection_worst(kf, ConnectionKind::Epsilon, spec, &mut rng)?,
    })
}

/// Crank-Nicolson solve of `∂_τ k = ∂_u² k` on a half-line with the Robin
/// condition at the origin, started from the closed-form kernel at `tau0`.
fn crank_nicolson(param: FaceParameter, init: &[f64], h: f64, dt: f64, steps: usize) -> Vec<f64> {
    let m = init.len();
    let r = dt / (2.0 * h * h);
    let beta = match param {
        FaceParameter::Robin(a) => 0.5 / a,
        _ => 0.0,
    };
    let dirichlet = param == FaceParameter::Dirichlet;
    // tridiagonal A with ghost u_{-1} = u_1 - 2hβ u_0 and u_m = 0
    let mut lower = vec![1.0; m];
    let mut diag = vec![-2.0; m];
    let mut upper = vec![1.0; m];
    diag[0] = -2.0 - 2.0 * h * beta;
    upper[0] = 2.0;
    lower[0] = 0.0;
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..m {
            let mut s = diag[i] * u[i];
            if i > 0 {
                s += lower[i] * u[i - 1];
            }
            if i + 1 < m {
                s += upper[i] * u[i + 1];
            }
            out[i] = s;
        }
    };
    let mut u = init.to_vec();
    if dirichlet {
        u[0] = 0.0;
    }
    let mut au = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut c = vec![0.0; m];
    for _ in 0..steps {
        apply(&u, &mut au);
        for i in 0..m {
            rhs[i] = u[i] + r * au[i];
        }
        // Thomas algorithm on (I - rA)
        let (mut b0, mut c0) = (1.0 - r * diag[0], -r * upper[0]);
        if dirichlet {
            b0 = 1.0;
            c0 = 0.0;
            rhs[0] = 0.0;
        }
        c[0] = c0 / b0;
        rhs[0] /= b0;
        for i in 1..m {
            let a = -r * lower[i];
            let b = 1.0 - r * diag[i] - a * c[i - 1];
            c[i] = if i + 1 < m { -r * upper[i] / b } else { 0.0 };
            rhs[i] = (rhs[i] - a * rhs[i - 1]) / b;
        }
        u[m - 1] = rhs[m - 1];
        for i in (0..m - 1).rev() {
            u[i] = rhs[i] - c[i] * u[i + 1];
        }
    }
    u
}

/// Independent check of the closed-form relative kernel: evolve it from
/// `tau0` to `tau1` by a Richardson-extrapolated Crank-Nicolson solve and
/// compare with the closed form at `tau1`.
pub fn robin_pde_check(
    coupling: Coupling,
    source: f64,
    tau0: f64,
    tau1: f64,
) -> Result<PdeCheck, PropagatorError> {
    if !(0.0 < tau0 && tau0 < tau1) || source < 0.0 {
        return Err(PropagatorError::InvalidRequest(format!(
            "need 0 < tau0 < tau1 and a source on the half-line, got {tau0}, {tau1}, {source}"
        )));
    }
    let k = robin_relative_kernel(coupling)?;
    let param = match coupling {
        Coupling::Robin(a) => FaceParameter::Robin(a),
        Coupling::Neumann => FaceParameter::Neumann,
        _ => FaceParameter::Dirichlet,
    };
    let beta = match param {
        FaceParameter::Robin(a) => 0.5 / a.abs(),
        _ => 0.0,
    };
    let extent = source + 14.0 * tau1.sqrt() + 2.0 * beta * tau1 + 2.0;
    let h = 0.01;
    let dt = 0.005;
    let run = |h: f64, dt: f64| {
        let m = (extent / h).ceil() as usize;
        let init: Vec<f64> = (0..m).map(|i| k(i as f64 * h, source, tau0)).collect();
        let steps = ((tau1 - tau0) / dt).round() as usize;
        crank_nicolson(param, &init, h, (tau1 - tau0) / steps as f64, steps)
    };
    let coarse = run(h, dt);
    let fine = run(0.5 * h, 0.5 * dt);
    let mut peak = 0.0f64;
    let mut worst = 0.0f64;
    for (i, c) in coarse.iter().enumerate() {
        let extrapolated = (4.0 * fine[2 * i] - c) / 3.0;
        let exact = k(i as f64 * h, source, tau1);
        peak = peak.max(exact.abs());
        worst = worst.max((extrapolated - exact).abs());
    }
    Ok(PdeCheck {
        coupling: coupling.label(),
        source,
        tau0,
        tau1,
        max_deviation: worst / peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{free_kernel, robin_pair_kernel};

    #[test]
    fn pde_oracle_accepts_closed_form() {
        for c in [
            Coupling::Robin(-1.0),
            Coupling::Robin(1.0),
            Coupling::Neumann,
            Coupling::Dirichlet,
        ] {
            let r = robin_pde_check(c, 0.7, 0.1, 0.6).unwrap();
            assert!(r.max_deviation < 1e-6, "{c:?}: {}", r.max_deviation);
        }
    }

    #[test]
    fn pde_oracle_rejects_wrong_coefficient() {
        // closed form for a = -1 evolved under the a = -2 boundary condition
        let k = robin_relative_kernel(Coupling::Robin(-1.0)).unwrap();
        let init: Vec<f64> = (0..1500).map(|i| k(i as f64 * 0.01, 0.7, 0.1)).collect();
        let out = crank_nicolson(FaceParameter::Robin(-2.0), &init, 0.01, 0.005, 100);
        let worst = out
            .iter()
            .enumerate()
            .map(|(i, v)| (v - k(i as f64 * 0.01, 0.7, 0.6)).abs())
            .fold(0.0, f64::max);
        assert!(worst > 1e-2);
    }

    #[test]
    fn free_kernel_assumptions_n2() {
        let r = verify_assumptions(&free_kernel(2), &SamplingSpec::default()).unwrap();
        assert!(r.worst() < 1e-6, "{r:?}");
        let rungs: Vec<f64> = r.initial_condition.iter().map(|x| x.residual).collect();
        assert!(rungs.windows(2).all(|w| w[1] < w[0]), "{rungs:?}");
    }

    #[test]
    fn wrong_normalization_breaks_composition() {
        let bad = free_kernel(2).scaled(1.1);
        let r = verify_assumptions(&bad, &SamplingSpec::default()).unwrap();
        assert!(r.composition > 0.05);
    }

    #[test]
    fn robin_pair_sector_properties() {
        for a in [-1.0, 1.0] {
            let k = robin_pair_kernel(2, Coupling::Robin(a)).unwrap();
            let model = CouplingModel::uniform(2, Coupling::Robin(a));
            let r = verify_sector_properties(&k, &model, &SamplingSpec::default()).unwrap();
            assert!(r.boundary < 1e-8, "{r:?}");
            assert!(r.composition < 1e-5, "{r:?}");
        }
    }
}
