//! Kernels and spectra against closed forms computed here, not by the crate.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use contact_duality::boundary::{Coupling, CouplingModel};
use contact_duality::propagator::{free_kernel, permutation_sum, robin_relative_kernel};
use contact_duality::spectral::{build, solve, DomainSpec, Formulation, SolverOptions};
use contact_duality::statistics::Statistics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_particle(x: f64, y: f64, tau: f64) -> f64 {
    (-(x - y).powi(2) / (2.0 * tau)).exp() / (2.0 * PI * tau).sqrt()
}

fn heat(s: f64, tau: f64) -> f64 {
    (-s * s / (4.0 * tau)).exp() / (4.0 * PI * tau).sqrt()
}

/// Sum over permutations of `sign^parity · Π m[i][σ(i)]` by recursion over
/// columns, with an explicit inversion count.
fn signed_sum(m: &[Vec<f64>], alternating: bool) -> f64 {
    fn go(m: &[Vec<f64>], row: usize, used: &mut Vec<usize>, alternating: bool) -> f64 {
        let n = m.len();
        if row == n {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| used[i] > used[j])
                .count();
            return if alternating && inversions % 2 == 1 {
                -1.0
            } else {
                1.0
            };
        }
        let mut total = 0.0;
        for c in 0..n {
            if used.contains(&c) {
                continue;
            }
            used.push(c);
            total += m[row][c] * go(m, row + 1, used, alternating);
            used.pop();
        }
        total
    }
    go(m, 0, &mut Vec::new(), alternating)
}

#[test]
fn free_permutation_sums_are_determinant_and_permanent() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in 2..=4 {
        let k = free_kernel(n);
        let fermi = permutation_sum(&k, Statistics::Fermi).unwrap();
        let bose = permutation_sum(&k, Statistics::Bose).unwrap();
        for _ in 0..5 {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            x.sort_by(|a, b| b.partial_cmp(a).unwrap());
            y.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let tau = rng.gen_range(0.2..1.0);
            let m: Vec<Vec<f64>> = x
                .iter()
                .map(|&xi| y.iter().map(|&yj| one_particle(xi, yj, tau)).collect())
                .collect();
            let det = signed_sum(&m, true);
            let perm = signed_sum(&m, false);
            let scale = perm.abs();
            assert!(
                (fermi.evaluate(&x, &y, tau) - det).abs() <= 1e-12 * scale,
                "n={n} det"
            );
            assert_relative_eq!(bose.evaluate(&x, &y, tau), perm, max_relative = 1e-12);
        }
    }
}

#[test]
fn determinant_oracle_checks_itself() {
    let m = vec![
        vec![2.0, 1.0, 0.0],
        vec![1.0, 3.0, 1.0],
        vec![0.0, 1.0, 4.0],
    ];
    assert_relative_eq!(signed_sum(&m, true), 18.0);
    assert_relative_eq!(signed_sum(&m, false), 30.0);
}

/// Half-line kernel for `∂_u K = β K` at `u = 0` as the Neumann pair minus
/// `2β ∫_0^∞ e^{-βσ} G(u + v + σ) dσ`, integrated by composite Simpson.
fn robin_by_quadrature(a: f64, u: f64, v: f64, tau: f64) -> f64 {
    let beta = 0.5 / a;
    let s = u + v;
    let upper = 40.0 * tau.sqrt() + 8.0 * beta.abs() * tau;
    let steps = 20_000;
    let h = upper / steps as f64;
    let f = |sig: f64| (-beta * sig).exp() * heat(s + sig, tau);
    let mut acc = f(0.0) + f(upper);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    heat(u - v, tau) + heat(s, tau) - 2.0 * beta * acc * h / 3.0
}

#[test]
fn robin_kernel_matches_image_integral() {
    for a in [-1.0, -0.3, 0.5, 2.0] {
        let k = robin_relative_kernel(Coupling::Robin(a)).unwrap();
        for (u, v, tau) in [
            (0.0, 0.7, 0.4),
            (0.3, 0.2, 0.05),
            (1.5, 0.1, 1.2),
            (2.0, 2.5, 0.8),
        ] {
            let want = robin_by_quadrature(a, u, v, tau);
            assert_relative_eq!(k(u, v, tau), want, max_relative = 1e-9);
        }
    }
}

#[test]
fn dirichlet_and_neumann_kernels_are_image_pairs() {
    let kd = robin_relative_kernel(Coupling::Dirichlet).unwrap();
    let kn = robin_relative_kernel(Coupling::Neumann).unwrap();
    for (u, v, tau) in [(0.4, 0.7, 0.4), (1.3, 0.2, 0.05), (0.0, 0.9, 2.0)] {
        assert_relative_eq!(
            kn(u, v, tau),
            heat(u - v, tau) + heat(u + v, tau),
            max_relative = 1e-14
        );
        assert!((kd(u, v, tau) - (heat(u - v, tau) - heat(u + v, tau))).abs() < 1e-15);
    }
}

#[test]
fn attractive_robin_kernel_is_dominated_by_the_bound_state() {
    // φ(u) = √(2κ) e^{-κu}, κ = 1/(2|a|), energy -κ² for ∂_τ = ∂_u²
    for a in [-1.0, -0.5] {
        let kappa: f64 = 0.5 / f64::abs(a);
        let tau = 60.0 / (kappa * kappa);
        let k = robin_relative_kernel(Coupling::Robin(a)).unwrap();
        for (u, v) in [(0.0, 0.0), (0.5, 1.0), (2.0, 0.3)] {
            let bound = 2.0 * kappa * (-kappa * (u + v)).exp() * (kappa * kappa * tau).exp();
            assert_relative_eq!(k(u, v, tau), bound, max_relative = 1e-10);
        }
    }
}

fn box_ladder(n: usize, l: f64, k: usize, distinct: bool) -> Vec<f64> {
    let max = 3 * k as u32 + n as u32;
    let mut sums = Vec::new();
    let mut q = vec![1u32; n];
    loop {
        let ordered = q
            .windows(2)
            .all(|w| if distinct { w[0] < w[1] } else { w[0] <= w[1] });
        if ordered {
            sums.push(q.iter().map(|v| v * v).sum::<u32>());
        }
        let mut i = 0;
        while i < n && q[i] == max {
            q[i] = 1;
            i += 1;
        }
        if i == n {
            break;
        }
        q[i] += 1;
    }
    sums.sort_unstable();
    sums.into_iter()
        .take(k)
        .map(|s| 0.5 * (PI / l).powi(2) * s as f64)
        .collect()
}

fn lowest(n: usize, cells: usize, c: Coupling, f: Formulation, k: usize) -> Vec<f64> {
    let dom = DomainSpec::boxed(n, PI, cells).unwrap();
    let model = CouplingModel::uniform(n, c);
    let op = build(f, &dom, &model).unwrap();
    let opts = SolverOptions {
        keep_vectors: false,
        ..SolverOptions::default()
    };
    solve(&op, k, &opts).unwrap().eigenvalues
}

#[test]
fn non_interacting_bosons_fill_the_box_ladder() {
    let want = box_ladder(2, PI, 5, false);
    assert_eq!(want, vec![1.0, 2.5, 4.0, 5.0, 6.5]);
    for (e, w) in lowest(2, 60, Coupling::Neumann, Formulation::Sector, 5)
        .iter()
        .zip(&want)
    {
        assert_relative_eq!(*e, *w, max_relative = 5e-3);
    }
}

#[test]
fn impenetrable_particles_fill_the_fermion_ladder() {
    let want = box_ladder(3, PI, 2, true);
    assert_eq!(want, vec![7.0, 10.5]);
    // second-order grids: errors drop fourfold and the extrapolation lands
    for f in [Formulation::Sector, Formulation::HardCoreBose] {
        let coarse = lowest(3, 24, Coupling::Dirichlet, f, 2);
        let fine = lowest(3, 48, Coupling::Dirichlet, f, 2);
        for i in 0..2 {
            let ratio = (coarse[i] - want[i]) / (fine[i] - want[i]);
            assert!(
                (ratio - 4.0).abs() < 0.3,
                "{f:?} level {i}: error ratio {ratio}"
            );
            assert_relative_eq!(
                (4.0 * fine[i] - coarse[i]) / 3.0,
                want[i],
                max_relative = 1e-3
            );
        }
    }
}
