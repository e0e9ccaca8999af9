use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{KernelCoupling, KernelEvaluator, PropagatorError};
use crate::boundary::{Coupling, CouplingModel, FaceParameter};
use crate::config_space::{enumerate_group, Parity};
use crate::special::erfcx;
use crate::statistics::{character, Space, Statistics};

/// One free particle: `(2πτ)^{-1/2} exp(-d²/(2τ))`.
fn single(d: f64, tau: f64) -> f64 {
    (-d * d / (2.0 * tau)).exp() / (2.0 * PI * tau).sqrt()
}

/// Relative-coordinate Gaussian, diffusion constant one.
fn rel_gauss(s: f64, tau: f64) -> f64 {
    (-s * s / (4.0 * tau)).exp() / (4.0 * PI * tau).sqrt()
}

/// Centre-of-mass factor for `X = (x₁ + x₂)/2`, diffusion constant ¼.
fn cm_gauss(d: f64, tau: f64) -> f64 {
    (-d * d / tau).exp() / (PI * tau).sqrt()
}

/// Correction added to the Neumann image at `s = u + v` so that
/// `∂_u K = K/(2a)` at `u = 0`.
fn robin_correction(s: f64, tau: f64, param: FaceParameter) -> f64 {
    match param {
        FaceParameter::Neumann => 0.0,
        FaceParameter::Dirichlet => -2.0 * rel_gauss(s, tau),
        FaceParameter::Robin(a) => {
            let beta = 0.5 / a;
            let z = (s + 2.0 * beta * tau) / (2.0 * tau.sqrt());
            let gauss = (-s * s / (4.0 * tau)).exp();
            if z >= 0.0 {
                -beta * erfcx(z) * gauss
            } else {
                -beta * (2.0 * (beta * s + beta * beta * tau).exp() - erfcx(-z) * gauss)
            }
        }
    }
}

fn face_parameter(c: Coupling) -> Result<FaceParameter, PropagatorError> {
    match c {
        Coupling::Robin(a) if a != 0.0 && a.is_finite() => Ok(FaceParameter::Robin(a)),
        Coupling::Neumann => Ok(FaceParameter::Neumann),
        Coupling::Dirichlet => Ok(FaceParameter::Dirichlet),
        other => Err(PropagatorError::InvalidRequest(format!(
            "pair kernels need a constant coupling, got {}",
            other.label()
        ))),
    }
}

/// Half-line kernel in `u = x₁ - x₂ ≥ 0` with `∂_u K = K/(2a)` at `u = 0`,
/// for `∂_τ K = ∂_u² K`.
pub fn robin_relative_kernel(
    coupling: Coupling,
) -> Result<impl Fn(f64, f64, f64) -> f64 + Clone, PropagatorError> {
    let p = face_parameter(coupling)?;
    Ok(move |u: f64, v: f64, tau: f64| {
        rel_gauss(u - v, tau) + rel_gauss(u + v, tau) + robin_correction(u + v, tau, p)
    })
}

fn pair_check(
    n: usize,
    coupling: Coupling,
) -> Result<(FaceParameter, CouplingModel), PropagatorError> {
    if n != 2 {
        return Err(PropagatorError::UnsupportedN { n });
    }
    let p = face_parameter(coupling)?;
    Ok((p, CouplingModel::uniform(2, coupling)))
}

/// `(2πτ)^{-n/2} exp(-|x-y|²/(2τ))` on the whole space.
pub fn free_kernel(n: usize) -> KernelEvaluator {
    KernelEvaluator::new(
        "free",
        n,
        Space::Full,
        None,
        KernelCoupling::Free,
        |x, y, tau| x.iter().zip(y).map(|(a, b)| single(a - b, tau)).product(),
    )
}

/// Sector kernel of two particles with a Robin face: free centre of mass
/// times the half-line Robin kernel of the relative coordinate.
pub fn robin_pair_kernel(n: usize, coupling: Coupling) -> Result<KernelEvaluator, PropagatorError> {
    let (_, model) = pair_check(n, coupling)?;
    let rel = robin_relative_kernel(coupling)?;
    Ok(KernelEvaluator::new(
        format!("robin_pair[{}]", coupling.label()),
        2,
        Space::Sector,
        None,
        KernelCoupling::Model(model),
        move |x, y, tau| {
            cm_gauss(0.5 * (x[0] + x[1] - y[0] - y[1]), tau) * rel(x[0] - x[1], y[0] - y[1], tau)
        },
    ))
}

/// Full-space boson kernel with a δ interaction of strength `1/a`: the
/// relative part is free on the odd sector and Robin on the even one.
pub fn delta_pair_kernel(n: usize, coupling: Coupling) -> Result<KernelEvaluator, PropagatorError> {
    let (p, model) = pair_check(n, coupling)?;
    Ok(KernelEvaluator::new(
        format!("delta_pair[{}]", coupling.label()),
        2,
        Space::Full,
        Some(Statistics::Bose),
        KernelCoupling::Model(model),
        move |x, y, tau| {
            let (u, v) = (x[0] - x[1], y[0] - y[1]);
            let rel = rel_gauss(u - v, tau) + 0.5 * robin_correction(u.abs() + v.abs(), tau, p);
            cm_gauss(0.5 * (x[0] + x[1] - y[0] - y[1]), tau) * rel
        },
    ))
}

/// Full-space fermion kernel with an ε interaction of strength `a`: the
/// relative part is free on the even sector and Robin on the odd one.
pub fn epsilon_pair_kernel(
    n: usize,
    coupling: Coupling,
) -> Result<KernelEvaluator, PropagatorError> {
    let (p, model) = pair_check(n, coupling)?;
    Ok(KernelEvaluator::new(
        format!("epsilon_pair[{}]", coupling.label()),
        2,
        Space::Full,
        Some(Statistics::Fermi),
        KernelCoupling::Model(model),
        move |x, y, tau| {
            let (u, v) = (x[0] - x[1], y[0] - y[1]);
            let (au, av) = (u.abs(), v.abs());
            let even = 0.5 * (rel_gauss(u - v, tau) + rel_gauss(u + v, tau));
            let odd = 0.5
                * u.signum()
                * v.signum()
                * (rel_gauss(au - av, tau)
                    + rel_gauss(au + av, tau)
                    + robin_correction(au + av, tau, p));
            cm_gauss(0.5 * (x[0] + x[1] - y[0] - y[1]), tau) * (even + odd)
        },
    ))
}

fn same_ordering(x: &[f64], y: &[f64]) -> bool {
    let n = x.len();
    (0..n).all(|i| (i + 1..n).all(|j| (x[i] - x[j]) * (y[i] - y[j]) > 0.0))
}

/// Impenetrable bosons: the free-fermion determinant inside each ordering
/// region, zero between regions.
pub fn hard_core_bose_kernel(n: usize) -> KernelEvaluator {
    KernelEvaluator::new(
        "hard_core_bose",
        n,
        Space::Full,
        Some(Statistics::Bose),
        KernelCoupling::Model(CouplingModel::uniform(n, Coupling::Dirichlet)),
        move |x, y, tau| {
            if !same_ordering(x, y) {
                return 0.0;
            }
            DMatrix::from_fn(n, n, |i, j| single(x[i] - y[j], tau)).determinant()
        },
    )
}

/// `K_M(x, y; τ) = Σ_σ χ(σ) K(x, σy; τ)` over the full symmetric group in
/// its fixed enumeration order.
pub fn permutation_sum(
    k: &KernelEvaluator,
    stat: Statistics,
) -> Result<KernelEvaluator, PropagatorError> {
    if k.space() != Space::Full {
        return Err(PropagatorError::InvalidRequest(
            "permutation sums take full-space kernels".into(),
        ));
    }
    let n = k.n();
    let group = enumerate_group(n, Parity::All).map_err(PropagatorError::CapExceeded)?;
    let weights: Vec<f64> = group.iter().map(|s| character(stat, s) as f64).collect();
    let group = Arc::new(group);
    let inner = k.clone();
    let label = format!(
        "sum_{}[{}]",
        if stat == Statistics::Bose {
            "bose"
        } else {
            "fermi"
        },
        k.label()
    );
    Ok(KernelEvaluator::new(
        label,
        n,
        Space::Sector,
        Some(stat),
        k.coupling().clone(),
        move |x, y, tau| {
            let mut buf = [0.0f64; 8];
            let sy = &mut buf[..n];
            let mut total = 0.0;
            for (sigma, w) in group.iter().zip(&weights) {
                sigma.apply_into(y, sy);
                total += w * inner.evaluate(x, sy, tau);
            }
            total
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_normalization() {
        let k = free_kernel(1);
        let tau = 1.0 / (2.0 * PI);
        assert!((k.evaluate(&[0.3], &[0.3], tau) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn robin_correction_limits() {
        // large a → Neumann, small a → Dirichlet
        for &(s, tau) in &[(0.0, 0.5), (0.7, 0.2), (2.0, 1.3)] {
            let far = robin_correction(s, tau, FaceParameter::Robin(1e9));
            assert!(far.abs() < 1e-8);
            let near = robin_correction(s, tau, FaceParameter::Robin(1e-9));
            let dir = robin_correction(s, tau, FaceParameter::Dirichlet);
            assert!((near - dir).abs() < 1e-7 * (1.0 + dir.abs()));
        }
    }

    #[test]
    fn correction_branches_agree_at_sign_change() {
        // z crosses zero at s = -2βτ for attractive couplings
        let (a, tau) = (-1.0, 0.8);
        let s0 = 0.8;
        let lo = robin_correction(s0 - 1e-9, tau, FaceParameter::Robin(a));
        let hi = robin_correction(s0 + 1e-9, tau, FaceParameter::Robin(a));
        assert!((lo - hi).abs() < 1e-8);
    }

    #[test]
    fn robin_condition_at_origin() {
        for a in [-1.0, 0.5, 2.0] {
            let k = robin_relative_kernel(Coupling::Robin(a)).unwrap();
            let (v, tau, h) = (0.6, 0.4, 1e-5);
            let d = (k(h, v, tau) - k(-h, v, tau)) / (2.0 * h);
            let val = k(0.0, v, tau);
            assert!((d - val / (2.0 * a)).abs() < 1e-8, "a = {a}");
        }
    }

    #[test]
    fn unsupported_n() {
        assert_eq!(
            robin_pair_kernel(3, Coupling::Robin(1.0)).unwrap_err(),
            PropagatorError::UnsupportedN { n: 3 }
        );
        assert!(matches!(
            delta_pair_kernel(2, Coupling::ScaleInvariant(1.0)),
            Err(PropagatorError::InvalidRequest(_))
        ));
    }

    #[test]
    fn face_cancellation_and_doubling() {
        let k = free_kernel(2);
        let fermi = permutation_sum(&k, Statistics::Fermi).unwrap();
        let bose = permutation_sum(&k, Statistics::Bose).unwrap();
        let (x, y, tau) = ([0.4, 0.4], [0.9, -0.2], 0.7);
        assert_eq!(fermi.evaluate(&x, &y, tau), 0.0);
        assert!((bose.evaluate(&x, &y, tau) - 2.0 * k.evaluate(&x, &y, tau)).abs() < 1e-15);
    }

    #[test]
    fn hard_core_kernel_is_delta_limit() {
        let hc = hard_core_bose_kernel(2);
        let d = delta_pair_kernel(2, Coupling::Dirichlet).unwrap();
        for (x, y) in [
            ([0.5, -0.2], [0.1, -0.9]),
            ([0.5, -0.2], [-0.4, 0.3]),
            ([-1.0, 0.2], [0.0, 0.7]),
        ] {
            let a = hc.evaluate(&x, &y, 0.6);
            let b = d.evaluate(&x, &y, 0.6);
            assert!((a - b).abs() < 1e-15, "{a} {b}");
        }
    }
}
