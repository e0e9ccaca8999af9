//! Geometry of the configuration space of `n` identical particles on a line.
//!
//! Points of the coincidence-free space are [`ConfigPoint`]s, points of the
//! ordered sector `x_1 > x_2 > ... > x_n` are [`SectorPoint`]s. The two are
//! related by [`canonicalize`], which returns the unique permutation sorting a
//! point into the sector. Jacobi coordinates and the hyperradius live here as
//! well, together with the folding identity that trades an integral over the
//! whole space for an integral of the symmetrized integrand over the sector.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{
    integrate_nested, BoxRegion, OrderedRegion, QuadratureError, QuadratureOptions,
};

/// Default cap on `n` for enumerating the symmetric group (8! = 40320).
pub const DEFAULT_GROUP_CAP: usize = 8;

/// Relative tolerance below which two coordinates count as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("coordinates {0} and {1} coincide: the point lies on the coincidence locus")]
    TiedCoordinates(usize, usize),
    #[error("point is not strictly decreasing at position {0}")]
    NotOrdered(usize),
    #[error("group enumeration for n = {n} exceeds the cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("invalid permutation images {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Two coordinates are tied when `|a - b| < 1e-12 * max(1, |a|, |b|)`.
pub fn coordinates_tied(a: f64, b: f64) -> bool {
    (a - b).abs() < COINCIDENCE_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// Element of the symmetric group acting on coordinates by
/// `(σx)_i = x_{σ(i)}`. Images are stored zero-based.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// Build from zero-based images; fails unless `images` is a bijection.
    pub fn from_images(images: Vec<usize>) -> Result<Self, GeometryError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(GeometryError::InvalidPermutation(images));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    /// Transposition of the zero-based indices `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(i, j);
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Zero-based image `σ(i)`.
    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &s)| i == s)
    }

    /// `(σx)_i = x_{σ(i)}`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.images.iter().map(|&s| x[s]).collect()
    }

    pub fn apply_into<T: Copy>(&self, x: &[T], out: &mut [T]) {
        for (o, &s) in out.iter_mut().zip(&self.images) {
            *o = x[s];
        }
    }

    /// The product `σσ'` with `σ(σ'x) = (σσ')x`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        // (σ(σ'x))_i = (σ'x)_{σ(i)} = x_{σ'(σ(i))}
        Permutation {
            images: self.images.iter().map(|&s| other.images[s]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for (i, &s) in self.images.iter().enumerate() {
            images[s] = i;
        }
        Permutation { images }
    }

    /// Sign via cycle decomposition.
    pub fn sign(&self) -> i8 {
        let n = self.images.len();
        let mut visited = vec![false; n];
        let mut transpositions = 0;
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                i = self.images[i];
                len += 1;
            }
            transpositions += len - 1;
        }
        if transpositions % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "σ[")?;
        for (k, i) in self.images.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    All,
    Even,
}

/// All of `S_n` (or `A_n`) in lexicographic order of the image arrays,
/// identity first.
pub fn enumerate_group(n: usize, parity: Parity) -> Result<Vec<Permutation>, GeometryError> {
    enumerate_group_with_cap(n, parity, DEFAULT_GROUP_CAP)
}

pub fn enumerate_group_with_cap(
    n: usize,
    parity: Parity,
    cap: usize,
) -> Result<Vec<Permutation>, GeometryError> {
    if n > cap {
        return Err(GeometryError::CapExceeded { n, cap });
    }
    let mut out = Vec::new();
    let mut images: Vec<usize> = (0..n).collect();
    loop {
        let p = Permutation {
            images: images.clone(),
        };
        if parity == Parity::All || p.sign() == 1 {
            out.push(p);
        }
        if !next_lexicographic(&mut images) {
            break;
        }
    }
    Ok(out)
}

fn next_lexicographic(a: &mut [usize]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Point of the coincidence-free configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint {
    coords: Vec<f64>,
}

impl ConfigPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        for j in 0..coords.len() {
            for k in j + 1..coords.len() {
                if coordinates_tied(coords[j], coords[k]) {
                    return Err(GeometryError::TiedCoordinates(j, k));
                }
            }
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }
}

/// Point of the ordered sector `x_1 > ... > x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorPoint {
    coords: Vec<f64>,
}

impl SectorPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        for j in 1..coords.len() {
            if coords[j - 1] <= coords[j] || coordinates_tied(coords[j - 1], coords[j]) {
                return Err(GeometryError::NotOrdered(j - 1));
            }
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_config(self) -> ConfigPoint {
        ConfigPoint {
            coords: self.coords,
        }
    }
}

/// Sort a point into the sector: returns `y` and `σ` with `y = σx`.
pub fn canonicalize(x: &ConfigPoint) -> Result<(SectorPoint, Permutation), GeometryError> {
    let c = &x.coords;
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
    for w in order.windows(2) {
        if coordinates_tied(c[w[0]], c[w[1]]) {
            let (a, b) = if w[0] < w[1] {
                (w[0], w[1])
            } else {
                (w[1], w[0])
            };
            return Err(GeometryError::TiedCoordinates(a, b));
        }
    }
    let sigma = Permutation { images: order };
    let y = sigma.apply(c);
    Ok((SectorPoint { coords: y }, sigma))
}

/// `∏_{j<k} sgn(x_j - x_k)`, or `None` on the coincidence locus.
pub fn vandermonde_sign(x: &[f64]) -> Option<i8> {
    let mut s = 1i8;
    for j in 0..x.len() {
        for k in j + 1..x.len() {
            if coordinates_tied(x[j], x[k]) {
                return None;
            }
            if x[j] < x[k] {
                s = -s;
            }
        }
    }
    Some(s)
}

/// Normalized Jacobi coordinates together with the hyperradial split.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPoint {
    /// `ξ_1, ..., ξ_n`; the last entry is the centre-of-mass coordinate.
    pub xi: Vec<f64>,
    pub r: f64,
    /// Hyperangular unit vector `ξ_j / r` for `j < n`; empty for `n = 2`
    /// (the hyperangular factor is absent) or when `r = 0`.
    pub unit: Vec<f64>,
    pub cm: f64,
}

impl JacobiPoint {
    pub fn from_xi(xi: Vec<f64>) -> Self {
        let n = xi.len();
        let cm = xi[n - 1];
        let r = xi[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit = if n > 2 && r > 0.0 {
            xi[..n - 1].iter().map(|v| v / r).collect()
        } else {
            Vec::new()
        };
        Self { xi, r, unit, cm }
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    /// Ordering condition on the relative coordinates equivalent to
    /// `x_1 > ... > x_n`: with `η_j = sqrt(j(j+1)/2) ξ_j`,
    /// `0 < η_1 < η_2 < ... < η_{n-1}`.
    pub fn in_sector(&self) -> bool {
        let n = self.xi.len();
        let mut prev = 0.0;
        for j in 1..n {
            let eta = ((j * (j + 1)) as f64 / 2.0).sqrt() * self.xi[j - 1];
            if eta <= prev {
                return false;
            }
            prev = eta;
        }
        true
    }
}

/// Orthogonal map to normalized Jacobi coordinates.
pub fn to_jacobi(x: &[f64]) -> JacobiPoint {
    let n = x.len();
    let mut xi = Vec::with_capacity(n);
    let mut prefix = 0.0;
    for j in 1..n {
        prefix += x[j - 1];
        let jf = j as f64;
        xi.push((prefix - jf * x[j]) / (jf * (jf + 1.0)).sqrt());
    }
    prefix += x[n - 1];
    xi.push(prefix / (n as f64).sqrt());
    JacobiPoint::from_xi(xi)
}

/// Inverse of [`to_jacobi`] (transpose of the orthogonal matrix).
pub fn from_jacobi(j: &JacobiPoint) -> Vec<f64> {
    let n = j.xi.len();
    let mut x = vec![j.xi[n - 1] / (n as f64).sqrt(); n];
    for k in 1..n {
        let kf = k as f64;
        let norm = (kf * (kf + 1.0)).sqrt();
        let c = j.xi[k - 1] / norm;
        for xi in x.iter_mut().take(k) {
            *xi += c;
        }
        x[k] -= kf * c;
    }
    x
}

/// `r = sqrt((1/n) Σ_{j<k} (x_j - x_k)^2)`.
pub fn hyperradius(x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            let d = x[j] - x[k];
            s += d * d;
        }
    }
    (s / n as f64).sqrt()
}

/// Truncated integration cube and tolerances for [`fold_integral_check`].
#[derive(Debug, Clone)]
pub struct FoldQuadrature {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub options: QuadratureOptions,
    /// Denominator floor for the relative residual.
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Compare `∫ f` over the whole (truncated) space with the sector integral of
/// `Σ_σ f(σy)`.
pub fn fold_integral_check<F>(f: F, quad: &FoldQuadrature) -> Result<FoldCheck, QuadratureError>
where
    F: Fn(&[f64]) -> f64,
{
    let n = quad.n;
    let full = BoxRegion {
        lower: vec![quad.lo; n],
        upper: vec![quad.hi; n],
        split_at_coincidences: false,
    };
    let lhs = integrate_nested(&full, &f, &quad.options)?.value;

    let group = enumerate_group(n, Parity::All).expect("fold check is only used for small n");
    let mut buf = vec![0.0; n];
    let buf = std::cell::RefCell::new(&mut buf);
    let sector = OrderedRegion {
        n,
        lo: quad.lo,
        hi: quad.hi,
    };
    let rhs = integrate_nested(
        &sector,
        |y| {
            let mut b = buf.borrow_mut();
            let mut s = 0.0;
            for sigma in &group {
                sigma.apply_into(y, &mut b);
                s += f(&b);
            }
            s
        },
        &quad.options,
    )?
    .value;
    let residual = (lhs - rhs).abs() / lhs.abs().max(quad.floor);
    Ok(FoldCheck { lhs, rhs, residual })
}

/// `exp(-(y-μ)ᵀ A (y-μ))` with symmetric positive-definite precision `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnisotropicGaussian {
    pub center: Vec<f64>,
    /// Row-major `n × n` precision matrix.
    pub precision: Vec<f64>,
}

/// `-ln(1e-16)`: the truncation level relative to the peak.
const GAUSS_TRUNCATION: f64 = 36.841_361_487_904_734;

impl AnisotropicGaussian {
    pub fn isotropic(n: usize) -> Self {
        let mut precision = vec![0.0; n * n];
        for i in 0..n {
            precision[i * n + i] = 1.0;
        }
        Self {
            center: vec![0.0; n],
            precision,
        }
    }

    /// Random centre in `[-1, 1]^n` and precision `BᵀB + 0.3 I` with `B`
    /// uniform in `[-1, 1]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let center = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut precision = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += b[k * n + i] * b[k * n + j];
                }
                precision[i * n + j] = s + if i == j { 0.3 } else { 0.0 };
            }
        }
        Self { center, precision }
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let n = self.n();
        let mut q = 0.0;
        for i in 0..n {
            let di = y[i] - self.center[i];
            for j in 0..n {
                q += di * self.precision[i * n + j] * (y[j] - self.center[j]);
            }
        }
        (-q).exp()
    }

    fn matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_row_slice(n, n, &self.precision)
    }

    /// `π^{n/2} / sqrt(det A)`.
    pub fn integral(&self) -> f64 {
        let n = self.n() as f64;
        std::f64::consts::PI.powf(n / 2.0) / self.matrix().determinant().sqrt()
    }

    /// Cube outside of which the function is below `1e-16` of its peak on
    /// every axis-marginal.
    pub fn fold_quadrature(&self, rel_tol: f64) -> FoldQuadrature {
        let n = self.n();
        let cov = self
            .matrix()
            .try_inverse()
            .expect("precision must be invertible");
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let half = (GAUSS_TRUNCATION * cov[(i, i)]).sqrt();
            lo = lo.min(self.center[i] - half);
            hi = hi.max(self.center[i] + half);
        }
        FoldQuadrature {
            n,
            lo,
            hi,
            options: QuadratureOptions {
                rel_tol,
                abs_tol: rel_tol * 1e-3 * self.integral(),
                max_subdivisions: 4000,
            },
            floor: 1e-300,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    const S2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn jacobi_examples() {
        let j = to_jacobi(&[1.0, 0.0]);
        assert!((j.xi[0] - 1.0 / S2).abs() < 1e-15);
        assert!((j.xi[1] - 1.0 / S2).abs() < 1e-15);
        assert!((j.r - 1.0 / S2).abs() < 1e-15);
        assert!(j.unit.is_empty());

        let j = to_jacobi(&[1.0, 0.0, -1.0]);
        assert!((j.xi[0] - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert!((j.xi[1] - 3.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!(j.xi[2].abs() < 1e-15);
        assert!((j.r - S2).abs() < 1e-15);

        let k = to_jacobi(&[2.0, 1.0, 0.0]);
        assert!((k.xi[0] - j.xi[0]).abs() < 1e-15);
        assert!((k.xi[1] - j.xi[1]).abs() < 1e-15);
        assert!((k.r - j.r).abs() < 1e-15);
        assert!((k.xi[2] - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn from_jacobi_round_trip_and_pure_cm() {
        let x = [1.0, 0.0, -1.0];
        let back = from_jacobi(&to_jacobi(&x));
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
        let c = 2.5;
        let x = from_jacobi(&JacobiPoint::from_xi(vec![0.0, 0.0, c]));
        for v in &x {
            assert!((v - c / 3f64.sqrt()).abs() < 1e-14);
        }
        assert!(matches!(
            ConfigPoint::new(x),
            Err(GeometryError::TiedCoordinates(0, 1))
        ));
    }

    #[test]
    fn hyperradius_examples() {
        assert!((hyperradius(&[1.0, 0.0, -1.0]) - S2).abs() < 1e-15);
        assert_eq!(hyperradius(&[0.7, 0.7, 0.7]), 0.0);
        assert!((hyperradius(&[6.0, 5.0, 4.0]) - S2).abs() < 1e-14);
    }

    #[test]
    fn canonicalize_examples() {
        let (y, s) = canonicalize(&ConfigPoint::new(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(y.coords(), &[1.0, 0.0]);
        assert_eq!(s, Permutation::transposition(2, 0, 1));
        assert_eq!(s.sign(), -1);

        let (y, s) = canonicalize(&ConfigPoint::new(vec![3.0, 2.0, 1.0]).unwrap()).unwrap();
        assert_eq!(y.coords(), &[3.0, 2.0, 1.0]);
        assert!(s.is_identity());

        let x = ConfigPoint::new(vec![1.0, 3.0, 2.0]).unwrap();
        let (y, s) = canonicalize(&x).unwrap();
        assert_eq!(y.coords(), &[3.0, 2.0, 1.0]);
        // sorting (1,3,2) is a 3-cycle: two adjacent swaps
        assert_eq!(s.sign(), 1);
        assert_eq!(s.apply(x.coords()), y.coords());
    }

    #[test]
    fn tied_points_are_rejected() {
        assert!(ConfigPoint::new(vec![1.0, 1.0 + 1e-14]).is_err());
        assert!(ConfigPoint::new(vec![1.0, 1.0 + 1e-9]).is_ok());
        assert!(SectorPoint::new(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn group_sizes() {
        let all = enumerate_group(3, Parity::All).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all.iter().filter(|p| p.sign() == 1).count(), 3);
        let even = enumerate_group(3, Parity::Even).unwrap();
        assert_eq!(even.len(), 3);
        assert!(even.iter().all(|p| p.sign() == 1));
        let even2 = enumerate_group(2, Parity::Even).unwrap();
        assert_eq!(even2, vec![Permutation::identity(2)]);
        assert_eq!(enumerate_group(8, Parity::All).unwrap().len(), 40320);
        assert!(matches!(
            enumerate_group(9, Parity::All),
            Err(GeometryError::CapExceeded { n: 9, cap: 8 })
        ));
        assert!(enumerate_group(1, Parity::All).unwrap()[0].is_identity());
    }

    #[test]
    fn sign_is_homomorphism_exhaustively() {
        for n in 1..=4 {
            let g = enumerate_group(n, Parity::All).unwrap();
            for a in &g {
                for b in &g {
                    assert_eq!(a.compose(b).sign(), a.sign() * b.sign());
                }
            }
        }
    }

    #[test]
    fn coset_partition_exhaustively() {
        for n in 2..=5 {
            let all = enumerate_group(n, Parity::All).unwrap();
            let even = enumerate_group(n, Parity::Even).unwrap();
            for (i, j) in [(0, 1), (0, n - 1)] {
                let tau = Permutation::transposition(n, i, j);
                let coset: Vec<Permutation> = even.iter().map(|s| s.compose(&tau)).collect();
                assert!(coset.iter().all(|c| !even.contains(c)));
                assert_eq!(even.len() + coset.len(), all.len());
                assert!(all.iter().all(|p| even.contains(p) || coset.contains(p)));
            }
        }
    }

    #[test]
    fn inverse_undoes() {
        for p in enumerate_group(4, Parity::All).unwrap() {
            assert!(p.compose(&p.inverse()).is_identity());
            assert!(p.inverse().compose(&p).is_identity());
        }
    }

    #[test]
    fn fold_gaussian_two_particles() {
        let g = AnisotropicGaussian::isotropic(2);
        let check = fold_integral_check(|y| g.eval(y), &g.fold_quadrature(1e-11)).unwrap();
        assert!((check.lhs - std::f64::consts::PI).abs() < 1e-9);
        assert!((check.rhs - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn fold_asymmetric_integrand() {
        let g = AnisotropicGaussian::isotropic(2);
        let f = |y: &[f64]| (y[0] + 0.3) * g.eval(y);
        let mut q = g.fold_quadrature(1e-11);
        q.floor = 1.0;
        let check = fold_integral_check(f, &q).unwrap();
        // oracle: 0.3 * π
        assert!((check.lhs - 0.3 * std::f64::consts::PI).abs() < 1e-9);
        assert!(check.residual <= 1e-8);
    }

    #[test]
    fn fold_three_particles() {
        let g = AnisotropicGaussian::isotropic(3);
        let check = fold_integral_check(|y| g.eval(y), &g.fold_quadrature(1e-9)).unwrap();
        let exact = std::f64::consts::PI.powf(1.5);
        assert!(((check.rhs - exact) / exact).abs() < 1e-8);
        assert!(check.residual <= 1e-8);
    }

    #[test]
    fn random_gaussian_integral_matches_closed_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = AnisotropicGaussian::random(2, &mut rng);
        let check = fold_integral_check(|y| g.eval(y), &g.fold_quadrature(1e-11)).unwrap();
        assert!(((check.lhs - g.integral()) / g.integral()).abs() < 1e-9);
    }

    fn arb_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<usize>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_images(v).unwrap())
    }

    proptest! {
        #[test]
        fn jacobi_is_orthogonal(x in (2usize..7).prop_flat_map(arb_point)) {
            let j = to_jacobi(&x);
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nj: f64 = j.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((nx - nj).abs() <= 1e-12 * nx.max(1.0));
            prop_assert!((j.r - hyperradius(&x)).abs() <= 1e-12 * nx.max(1.0));
            if j.r > 1e-9 && x.len() > 2 {
                let u: f64 = j.unit.iter().map(|v| v * v).sum::<f64>();
                prop_assert!((u - 1.0).abs() < 1e-12);
            }
            let back = from_jacobi(&j);
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-12 * nx.max(1.0));
            }
        }

        #[test]
        fn ordering_equivalence(x in (2usize..7).prop_flat_map(arb_point)) {
            let ordered = x.windows(2).all(|w| w[0] > w[1]);
            prop_assert_eq!(to_jacobi(&x).in_sector(), ordered);
            let mut sorted = x.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if let Ok(p) = SectorPoint::new(sorted.clone()) {
                prop_assert!(to_jacobi(p.coords()).in_sector());
            }
        }

        #[test]
        fn composition_law((a, b, x) in (2usize..7).prop_flat_map(|n| (arb_perm(n), arb_perm(n), arb_point(n)))) {
            prop_assert_eq!(a.apply(&b.apply(&x)), a.compose(&b).apply(&x));
        }

        #[test]
        fn canonicalize_sorts(x in (2usize..7).prop_flat_map(arb_point)) {
            if let Ok(p) = ConfigPoint::new(x.clone()) {
                let (y, s) = canonicalize(&p).unwrap();
                prop_assert_eq!(s.apply(&x), y.coords().to_vec());
                prop_assert_eq!(vandermonde_sign(&x), Some(s.sign()));
            }
        }
    }
}
