//! Two-body boundary data on the faces `x_j = x_{j+1}` of the sector:
//! coupling models, normals, Robin and flux residuals, and the δ/ε
//! connection conditions across coincidence hyperplanes of the full space.
//!
//! Public face indices are 1-based (`j ∈ 1..n`), matching the usual labelling
//! of the adjacent pair. Internal helpers take 0-based sorted positions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_space::{hyperradius, Permutation};
use crate::statistics::{Space, WavefunctionGrid};

/// Radius below which a scale-invariant coupling is undefined.
pub const RADIUS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("face index {j} out of range 1..={max}")]
    IndexOutOfRange { j: usize, max: usize },
    #[error("scale-invariant coupling undefined at hyperradius {r:e}")]
    DegenerateRadius { r: f64 },
    #[error("point is not on the face x_{j} = x_{}", j + 1)]
    NotOnFace { j: usize },
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Contact data on one face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Coupling {
    /// Robin length `a` (nonzero, finite).
    Robin(f64),
    /// `1/a = 0`: free bosons.
    Neumann,
    /// `a = 0`: hard core, free fermions.
    Dirichlet,
    /// `a = g r` with `r` the hyperradius.
    ScaleInvariant(f64),
}

impl Coupling {
    pub fn label(&self) -> String {
        match self {
            Coupling::Robin(a) => format!("robin({a})"),
            Coupling::Neumann => "neumann".into(),
            Coupling::Dirichlet => "dirichlet".into(),
            Coupling::ScaleInvariant(g) => format!("scale_invariant({g})"),
        }
    }
}

/// The coupling evaluated at a point of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceParameter {
    Robin(f64),
    Neumann,
    Dirichlet,
}

impl FaceParameter {
    /// `1/a`, zero for Neumann; `None` for Dirichlet.
    pub fn inverse_length(&self) -> Option<f64> {
        match *self {
            FaceParameter::Robin(a) => Some(1.0 / a),
            FaceParameter::Neumann => Some(0.0),
            FaceParameter::Dirichlet => None,
        }
    }

    /// `a`, zero for Dirichlet; `None` for Neumann.
    pub fn length(&self) -> Option<f64> {
        match *self {
            FaceParameter::Robin(a) => Some(a),
            FaceParameter::Neumann => None,
            FaceParameter::Dirichlet => Some(0.0),
        }
    }

    /// Extended-real encoding: `±∞` for Neumann, `0` for Dirichlet.
    pub fn as_extended(&self) -> f64 {
        match *self {
            FaceParameter::Robin(a) => a,
            FaceParameter::Neumann => f64::INFINITY,
            FaceParameter::Dirichlet => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    entries: Vec<Coupling>,
}

impl CouplingModel {
    /// One entry per face `j = 1..n-1`.
    pub fn new(entries: Vec<Coupling>) -> Result<Self, BoundaryError> {
        if entries.is_empty() {
            return Err(BoundaryError::InvalidCoupling(
                "need at least one face (n >= 2)".into(),
            ));
        }
        let n = entries.len() + 1;
        for (k, c) in entries.iter().enumerate() {
            match *c {
                Coupling::Robin(a) if a == 0.0 || !a.is_finite() => {
                    return Err(BoundaryError::InvalidCoupling(format!(
                        "face {}: Robin length must be finite and nonzero (use the dirichlet/neumann limits)",
                        k + 1
                    )))
                }
                Coupling::ScaleInvariant(g) if g == 0.0 || !g.is_finite() => {
                    return Err(BoundaryError::InvalidCoupling(format!(
                        "face {}: scale-invariant g must be finite and nonzero",
                        k + 1
                    )))
                }
                Coupling::ScaleInvariant(_) if n == 2 => {
                    return Err(BoundaryError::InvalidCoupling(
                        "scale-invariant coupling needs n >= 3; for n = 2 the hyperradius vanishes on the face".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(Self { entries })
    }

    pub fn uniform(n: usize, c: Coupling) -> Self {
        Self::new(vec![c; n.saturating_sub(1).max(1)]).expect("uniform coupling must be valid")
    }

    pub fn n(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn entries(&self) -> &[Coupling] {
        &self.entries
    }

    pub fn any(&self, pred: impl Fn(&Coupling) -> bool) -> bool {
        self.entries.iter().any(pred)
    }

    pub fn is_scale_free(&self) -> bool {
        self.entries.iter().all(|c| {
            matches!(
                c,
                Coupling::ScaleInvariant(_) | Coupling::Neumann | Coupling::Dirichlet
            )
        })
    }

    /// Face data at sorted position `j` (0-based) for a point `x` on that
    /// face. The total-coincidence corner of a scale-invariant face is
    /// treated as hard core.
    pub fn face_parameter(&self, j: usize, x: &[f64]) -> FaceParameter {
        match self.entries[j] {
            Coupling::Robin(a) => FaceParameter::Robin(a),
            Coupling::Neumann => FaceParameter::Neumann,
            Coupling::Dirichlet => FaceParameter::Dirichlet,
            Coupling::ScaleInvariant(g) => {
                let r = hyperradius(x);
                if r < RADIUS_TOL * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                    FaceParameter::Dirichlet
                } else {
                    FaceParameter::Robin(g * r)
                }
            }
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(Coupling::label).collect()
    }
}

fn check_face(j: usize, n: usize) -> Result<usize, BoundaryError> {
    if j == 0 || j >= n {
        return Err(BoundaryError::IndexOutOfRange {
            j,
            max: n.saturating_sub(1),
        });
    }
    Ok(j - 1)
}

/// `n_j = e_j - e_{j+1}`.
pub fn normal_vector(j: usize, n: usize) -> Result<Vec<f64>, BoundaryError> {
    let q = check_face(j, n)?;
    let mut v = vec![0.0; n];
    v[q] = 1.0;
    v[q + 1] = -1.0;
    Ok(v)
}

/// `a_j` at a point of face `j`: the Robin constant, `g_j r`, `+∞` for
/// Neumann or `0` for Dirichlet.
pub fn coupling_value(model: &CouplingModel, j: usize, x: &[f64]) -> Result<f64, BoundaryError> {
    let q = check_face(j, model.n())?;
    if x.len() != model.n() {
        return Err(BoundaryError::DimensionMismatch {
            expected: model.n(),
            got: x.len(),
        });
    }
    let scale = 1.0f64.max(x[q].abs()).max(x[q + 1].abs());
    if (x[q] - x[q + 1]).abs() > 1e-9 * scale {
        return Err(BoundaryError::NotOnFace { j });
    }
    match model.entries[q] {
        Coupling::Robin(a) => Ok(a),
        Coupling::Neumann => Ok(f64::INFINITY),
        Coupling::Dirichlet => Ok(0.0),
        Coupling::ScaleInvariant(g) => {
            let r = hyperradius(x);
            if r < RADIUS_TOL {
                Err(BoundaryError::DegenerateRadius { r })
            } else {
                Ok(g * r)
            }
        }
    }
}

/// One-sided derivative along `+d` from samples at `0, h, 2h, ...`.
fn one_sided(f: &[Complex64], h: f64) -> Complex64 {
    match f.len() {
        2 => (f[1] - f[0]) / h,
        3 => (f[0] * -3.0 + f[1] * 4.0 - f[2]) / (2.0 * h),
        _ => unreachable!("unsupported stencil length"),
    }
}

/// Samples along `s + k d`, `d = e_q - e_{q+1}`, for `k = 0..len`, read
/// from `values` through the sector grid. `None` if any node is missing.
fn face_samples(
    psi: &WavefunctionGrid,
    values: &[Complex64],
    i: usize,
    q: usize,
    len: usize,
) -> Option<Vec<Complex64>> {
    let grid = psi.grid();
    let mut s = grid.node(i).to_vec();
    let mut out = Vec::with_capacity(len);
    out.push(values[i]);
    for _ in 1..len {
        if s[q + 1] == 0 {
            return None;
        }
        s[q] += 1;
        s[q + 1] -= 1;
        out.push(values[grid.index_of(&s)?]);
    }
    Some(out)
}

/// Value and normal derivative `(∂_j - ∂_{j+1})ψ` at the open face nodes
/// of sorted position `q`, from one-sided interior stencils. Second order
/// where three layers exist; only when no node has three layers does it fall
/// back to first order.
fn face_data(
    psi: &WavefunctionGrid,
    values: &[Complex64],
    q: usize,
) -> Vec<(usize, Complex64, Complex64)> {
    let grid = psi.grid();
    let h = grid.domain().spacing();
    let faces: Vec<usize> = (0..grid.len())
        .filter(|&i| on_open_face(grid.node(i), q))
        .collect();
    for len in [3, 2] {
        let out: Vec<_> = faces
            .iter()
            .filter_map(|&i| {
                face_samples(psi, values, i, q, len).map(|f| (i, f[0], one_sided(&f, h)))
            })
            .collect();
        if !out.is_empty() {
            if len == 2 {
                log::warn!(
                    "face {}: fewer than three layers, using first-order normal derivatives",
                    q + 1
                );
            }
            return out;
        }
    }
    Vec::new()
}

fn sector_values(psi: &WavefunctionGrid) -> &[Complex64] {
    match psi.space() {
        Space::Sector => psi.values(),
        // the identity-region copy holds the sector values
        Space::Full => psi.copy(0),
    }
}

/// Largest `|(∂_j - ∂_{j+1})ψ - ψ/a_j|` over the face nodes of face `j`,
/// relative to `max |ψ|`. Nodes at codimension-two corners are skipped.
pub fn robin_residual(
    psi: &WavefunctionGrid,
    j: usize,
    model: &CouplingModel,
) -> Result<f64, BoundaryError> {
    let grid = psi.grid();
    let q = check_face(j, grid.n())?;
    if model.n() != grid.n() {
        return Err(BoundaryError::DimensionMismatch {
            expected: grid.n(),
            got: model.n(),
        });
    }
    let values = sector_values(psi);
    let scale = values
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if matches!(model.entries[q], Coupling::Dirichlet) {
        // hard-core faces carry no nodes; any surviving face value counts
        let worst = (0..grid.len())
            .filter(|&i| on_open_face(grid.node(i), q))
            .map(|i| values[i].norm() / scale)
            .fold(0.0, f64::max);
        return Ok(worst);
    }
    let data = face_data(psi, values, q);
    if data.is_empty() {
        return Err(BoundaryError::GridTooCoarse(format!(
            "no face node of face {j} has an interior stencil"
        )));
    }
    let mut worst = 0.0f64;
    for (i, f0, d) in data {
        let res = match model.face_parameter(q, &grid.coords(i)).inverse_length() {
            Some(inv) => (d - f0 * inv).norm(),
            None => f0.norm(),
        };
        worst = worst.max(res / scale);
    }
    Ok(worst)
}

/// Face node of sorted position `q` away from other ties.
fn on_open_face(s: &[u32], q: usize) -> bool {
    s[q] == s[q + 1] && (q == 0 || s[q - 1] != s[q]) && (q + 2 >= s.len() || s[q + 2] != s[q + 1])
}

/// Largest `|Im(conj ψ · n_j·∇ψ)|` over face nodes, relative to `max |ψ|²`.
pub fn probability_flux(psi: &WavefunctionGrid, j: usize) -> Result<f64, BoundaryError> {
    let grid = psi.grid();
    let q = check_face(j, grid.n())?;
    let values = sector_values(psi);
    let scale = values
        .iter()
        .map(|v| v.norm_sqr())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // hard-core faces carry no nodes and no current
    Ok(face_data(psi, values, q)
        .into_iter()
        .map(|(_, f0, d)| (f0.conj() * d).im.abs() / scale)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    /// Derivative jump `(1/a)(ψ₊ + ψ₋)`, continuous value.
    Delta,
    /// Value jump `a(ψ'₊ + ψ'₋)`, continuous derivative.
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionResidual {
    /// Jump condition.
    pub r1: f64,
    /// Continuity condition.
    pub r2: f64,
}

impl ConnectionResidual {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2)
    }
}

fn check_kind(kind: ConnectionKind, a: f64) -> Result<(), BoundaryError> {
    match kind {
        ConnectionKind::Delta if a == 0.0 => Err(BoundaryError::InvalidCoupling(
            "delta strength 1/a is infinite at a = 0".into(),
        )),
        ConnectionKind::Epsilon if !a.is_finite() => Err(BoundaryError::InvalidCoupling(
            "epsilon strength a must be finite".into(),
        )),
        _ if a.is_nan() => Err(BoundaryError::InvalidCoupling("coupling is NaN".into())),
        _ => Ok(()),
    }
}

fn jump_terms(
    kind: ConnectionKind,
    a: f64,
    fp: Complex64,
    fm: Complex64,
    dp: Complex64,
    dm: Complex64,
) -> (f64, f64) {
    match kind {
        ConnectionKind::Delta => {
            let inv = if a.is_infinite() { 0.0 } else { 1.0 / a };
            ((dp - dm - (fp + fm) * inv).norm(), (fp - fm).norm())
        }
        ConnectionKind::Epsilon => ((fp - fm - (dp + dm) * a).norm(), (dp - dm).norm()),
    }
}

/// Connection residuals of a full-space function across every hyperplane
/// segment adjacent to face `j` of every ordering region, relative to
/// `max |ψ|`. `a = ±∞` is allowed for `Delta` (no interaction) and `a = 0`
/// for `Epsilon`.
pub fn connection_residual(
    psi: &WavefunctionGrid,
    j: usize,
    kind: ConnectionKind,
    a: f64,
) -> Result<ConnectionResidual, BoundaryError> {
    check_kind(kind, a)?;
    let grid = psi.grid();
    let n = grid.n();
    let q = check_face(j, n)?;
    if psi.space() != Space::Full {
        return Err(BoundaryError::InvalidCoupling(
            "connection conditions need a full-space function".into(),
        ));
    }
    let h = grid.domain().spacing();
    let group = psi.group();
    let tau = Permutation::transposition(n, q, q + 1);
    let scale = psi.max_abs().max(f64::MIN_POSITIVE);
    let mut out = ConnectionResidual { r1: 0.0, r2: 0.0 };
    let mut seen = 0usize;
    for (g, sigma) in group.iter().enumerate() {
        let partner = tau.compose(sigma);
        let other = group
            .iter()
            .position(|p| *p == partner)
            .expect("group is closed");
        let plus = psi.copy(g);
        let minus = psi.copy(other);
        for i in 0..grid.len() {
            if !on_open_face(grid.node(i), q) {
                continue;
            }
            let (Some(fp), Some(fm)) = (
                face_samples(psi, plus, i, q, 3),
                face_samples(psi, minus, i, q, 3),
            ) else {
                continue;
            };
            let dp = one_sided(&fp, h);
            // on the minus side the samples run towards negative x_jk
            let dm = -one_sided(&fm, h);
            let (r1, r2) = jump_terms(kind, a, fp[0], fm[0], dp, dm);
            out.r1 = out.r1.max(r1 / scale);
            out.r2 = out.r2.max(r2 / scale);
            seen += 1;
        }
    }
    if seen == 0 {
        return Err(BoundaryError::GridTooCoarse(format!(
            "no resolvable node on the hyperplanes of face {j}"
        )));
    }
    Ok(out)
}

/// Offset `x + t (e_q - e_{q+1})`.
fn along(x: &[f64], q: usize, t: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[q] += t;
    y[q + 1] -= t;
    y
}

/// Lagrange weights extrapolating value and first derivative to `t = 0`
/// from samples at `t_k`.
fn extrapolation_weights(t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut wv = Vec::with_capacity(t.len());
    let mut wd = Vec::with_capacity(t.len());
    for (k, &tk) in t.iter().enumerate() {
        let mut l = 1.0;
        let mut dl = 0.0;
        for (m, &tm) in t.iter().enumerate() {
            if m != k {
                l *= -tm / (tk - tm);
                dl += 1.0 / -tm;
            }
        }
        wv.push(l);
        wd.push(l * dl);
    }
    (wv, wd)
}

/// One-sided limits of the value and the normal derivative of `f` at a point
/// of face `j`, approached from `x_j > x_{j+1}` (`plus = true`) or the other
/// side. Samples sit at `(k + ½) h` along the normal, never on the
/// hyperplane itself, and are extrapolated with a quartic.
pub fn one_sided_face_data<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    j: usize,
    plus: bool,
    h: f64,
) -> Result<(f64, f64), BoundaryError> {
    let q = check_face(j, x.len())?;
    let sgn = if plus { 1.0 } else { -1.0 };
    let t: Vec<f64> = (0..5).map(|k| (k as f64 + 0.5) * h).collect();
    let (wv, wd) = extrapolation_weights(&t);
    let mut value = 0.0;
    let mut deriv = 0.0;
    for (k, &tk) in t.iter().enumerate() {
        let v = f(&along(x, q, sgn * tk));
        value += wv[k] * v;
        deriv += wd[k] * v;
    }
    Ok((value, sgn * deriv))
}

/// Robin residual `|(∂_j - ∂_{j+1})f - f/a|` of a function at a face point,
/// from the sector side.
pub fn robin_residual_fn<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    j: usize,
    param: FaceParameter,
    h: f64,
) -> Result<f64, BoundaryError> {
    let (v, d) = one_sided_face_data(f, x, j, true, h)?;
    Ok(match param.inverse_length() {
        Some(inv) => (d - inv * v).abs(),
        None => v.abs(),
    })
}

/// Connection residuals of a function at a hyperplane point, both sides
/// sampled with one-sided fourth-order stencils of step `h`.
pub fn connection_residual_fn<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    j: usize,
    kind: ConnectionKind,
    a: f64,
    h: f64,
) -> Result<ConnectionResidual, BoundaryError> {
    check_kind(kind, a)?;
    let (fp, dp) = one_sided_face_data(f, x, j, true, h)?;
    let (fm, dm) = one_sided_face_data(f, x, j, false, h)?;
    let c = |v: f64| Complex64::new(v, 0.0);
    let (r1, r2) = jump_terms(kind, a, c(fp), c(fm), c(dp), c(dm));
    Ok(ConnectionResidual { r1, r2 })
}
