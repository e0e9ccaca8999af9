//! Lowest eigenpairs by Chebyshev-filtered subspace iteration, and the imaginary-time
//! action `exp(-τS) v` by Krylov projection.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::operator::{Formulation, GridOperator};
use super::SpectralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on `‖Sy - λy‖` for unit `y`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov basis size; chosen from `k` when absent.
    pub krylov_dim: Option<usize>,
    pub seed: u64,
    /// Dimensions up to this use a dense decomposition.
    pub dense_below: usize,
    pub keep_vectors: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_restarts: 3000,
            krylov_dim: None,
            seed: 0x5eed_0001,
            dense_below: 500,
            keep_vectors: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub formulation: Formulation,
    pub cells: usize,
    pub h: f64,
    pub dimension: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Eigenvectors of the symmetrized operator, unit Euclidean norm.
    #[serde(skip)]
    pub vectors: Option<Vec<Vec<f64>>>,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(b, a)| *b += alpha * a);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flip so the largest-magnitude component is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-9) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orthogonalize `w` against `basis` twice, returning the accumulated
/// coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coef.iter_mut().zip(basis) {
            let p = dot(v, w);
            *c += p;
            axpy(-p, v, w);
        }
    }
    coef
}

fn residual_norm(op: &GridOperator, v: &[f64], lambda: f64, scratch: &mut [f64]) -> f64 {
    op.apply(v, scratch);
    scratch
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn finish(
    op: &GridOperator,
    k: usize,
    mut pairs: Vec<(f64, Vec<f64>)>,
    matvecs: usize,
    keep: bool,
) -> SpectrumResult {
    pairs.truncate(k);
    let mut scratch = vec![0.0; op.dim()];
    let mut eigenvalues = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for (lambda, mut v) in pairs {
        fix_sign(&mut v);
        residuals.push(residual_norm(op, &v, lambda, &mut scratch));
        eigenvalues.push(lambda);
        vectors.push(v);
    }
    let dom = op.domain();
    SpectrumResult {
        formulation: op.formulation(),
        cells: dom.cells,
        h: dom.spacing(),
        dimension: op.dim(),
        eigenvalues,
        residuals,
        vectors: keep.then_some(vectors),
        matvecs,
    }
}

/// All eigenpairs of the assembled matrix via a dense decomposition.
pub fn solve_dense(
    op: &GridOperator,
    k: usize,
    keep_vectors: bool,
) -> Result<SpectrumResult, SpectralError> {
    check_k(op, k)?;
    let eig = SymmetricEigen::new(op.matrix().to_dense());
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let pairs = order
        .into_iter()
        .take(k)
        .map(|i| {
            (
                eig.eigenvalues[i],
                eig.eigenvectors.column(i).iter().copied().collect(),
            )
        })
        .collect();
    Ok(finish(op, k, pairs, 0, keep_vectors))
}

fn check_k(op: &GridOperator, k: usize) -> Result<(), SpectralError> {
    if k == 0 || k > op.dim() {
        return Err(SpectralError::InvalidRequest(format!(
            "asked for {k} eigenpairs of a {}-dimensional operator",
            op.dim()
        )));
    }
    Ok(())
}

/// One Lanczos cycle of length `m` with full reorthogonalization,
/// returning the `keep` lowest Ritz pairs.
fn lanczos_cycle(
    op: &GridOperator,
    m: usize,
    keep: usize,
    start: Vec<f64>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<(f64, Vec<f64>)> {
    let dim = op.dim();
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut w = vec![0.0; dim];
    for j in 0..m {
        op.apply(&basis[j], &mut w);
        let coef = orthogonalize(&basis, &mut w);
        for (i, c) in coef.iter().enumerate() {
            t[(i, j)] = *c;
            t[(j, i)] = *c;
        }
        if j + 1 == m {
            break;
        }
        let beta = norm(&w);
        if beta < 1e-14 * t[(j, j)].abs().max(1e-300) {
            // invariant subspace: continue with a fresh direction
            w.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            orthogonalize(&basis, &mut w);
            let n = norm(&w);
            basis.push(w.iter().map(|x| x / n).collect());
        } else {
            basis.push(w.iter().map(|x| x / beta).collect());
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .take(keep)
        .map(|i| {
            let mut v = vec![0.0; dim];
            for (l, b) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(l, i)], b, &mut v);
            }
            (eig.eigenvalues[i], v)
        })
        .collect()
}

/// `T_d((c - S)/e) v`: Chebyshev filter amplifying the spectrum below
/// `c - e` and bounded by one on `[c - e, c + e]`.
fn chebyshev_filter(
    op: &GridOperator,
    degree: usize,
    c: f64,
    e: f64,
    v: &[f64],
    out: &mut [f64],
    scratch: &mut [Vec<f64>; 2],
) {
    let dim = v.len();
    let [prev, cur] = scratch;
    prev.copy_from_slice(v);
    op.apply(v, cur);
    for i in 0..dim {
        cur[i] = (c * v[i] - cur[i]) / e;
    }
    for _ in 1..degree {
        op.apply(cur, out);
        for i in 0..dim {
            let next = 2.0 * (c * cur[i] - out[i]) / e - prev[i];
            prev[i] = cur[i];
            cur[i] = next;
        }
    }
    out.copy_from_slice(cur);
}

/// Orthonormalize the columns in place; a column that collapses is
/// replaced by a fresh random direction.
fn orthonormalize(block: &mut [Vec<f64>], rng: &mut rand_chacha::ChaCha8Rng) {
    for i in 0..block.len() {
        let scale = norm(&block[i]);
        if scale > 0.0 {
            block[i].iter_mut().for_each(|x| *x /= scale);
        }
        let (done, rest) = block.split_at_mut(i);
        let v = &mut rest[0];
        orthogonalize(done, v);
        let mut n = norm(v);
        if n < 1e-10 {
            v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            orthogonalize(done, v);
            n = norm(v);
        }
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// The `k` lowest eigenpairs.
///
/// One unfiltered Lanczos cycle supplies a starting block and brackets the
/// wanted end of the spectrum. Chebyshev-filtered subspace iteration with
/// Rayleigh-Ritz projection then refines the block; the filter needs only
/// sparse products, so fine grids avoid long reorthogonalized bases.
pub fn solve(
    op: &GridOperator,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult, SpectralError> {
    check_k(op, k)?;
    let dim = op.dim();
    let m = opts.krylov_dim.unwrap_or((2 * k + 20).max(40)).min(dim);
    if dim <= opts.dense_below || m >= dim || m <= k + 1 {
        return solve_dense(op, k, opts.keep_vectors);
    }
    let p = (k + 8).min(m - 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = norm(&start);
    start.iter_mut().for_each(|x| *x /= s);

    let mut block: Vec<Vec<f64>> = lanczos_cycle(op, m, p, start, &mut rng)
        .into_iter()
        .map(|p| p.1)
        .collect();
    let mut matvecs = m;
    let (_, upper) = op.matrix().gershgorin();
    let mut cheb = [vec![0.0; dim], vec![0.0; dim]];
    let mut filtered = vec![0.0; dim];
    let mut best = (0usize, f64::INFINITY);

    for iteration in 0..=opts.max_restarts {
        orthonormalize(&mut block, &mut rng);
        let images: Vec<Vec<f64>> = block
            .iter()
            .map(|v| {
                let mut w = vec![0.0; dim];
                op.apply(v, &mut w);
                w
            })
            .collect();
        matvecs += p;
        let h = DMatrix::from_fn(p, p, |i, j| {
            0.5 * (dot(&block[i], &images[j]) + dot(&block[j], &images[i]))
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut rotated = vec![vec![0.0; dim]; p];
        let mut worst = 0.0f64;
        let mut good = 0;
        for (slot, &i) in order.iter().enumerate() {
            let mut r = vec![0.0; dim];
            for l in 0..p {
                let c = eig.eigenvectors[(l, i)];
                axpy(c, &block[l], &mut rotated[slot]);
                if slot < k {
                    axpy(c, &images[l], &mut r);
                }
            }
            if slot < k {
                axpy(-theta[slot], &rotated[slot], &mut r);
                let rn = norm(&r);
                worst = worst.max(rn);
                if rn <= opts.tol {
                    good += 1;
                }
            }
        }
        block = rotated;
        if worst < best.1 {
            best = (good, worst);
        }
        if good == k {
            log::debug!(
                "{}: {k} pairs after {iteration} filtered sweeps, {matvecs} products",
                op.formulation().name()
            );
            let pairs = theta.iter().copied().zip(block).take(k).collect();
            return Ok(finish(op, k, pairs, matvecs, opts.keep_vectors));
        }
        if iteration == opts.max_restarts {
            break;
        }
        // damp [θ_{p-1}, upper]; the degree puts the k-th Ritz value a
        // fixed factor above the damped band while keeping the block well
        // conditioned
        let lo = theta[p - 1];
        let c = 0.5 * (upper + lo);
        let e = 0.5 * (upper - lo).max(1e-300);
        let reach = ((c - theta[k - 1]) / e).max(1.0 + 1e-12).acosh();
        let top = ((c - theta[0]) / e).max(1.0 + 1e-12).acosh();
        let degree = ((4.0 / reach).ceil() as usize)
            .clamp(8, 400)
            .min(((20.0 / top) as usize).max(2));
        for v in block.iter_mut() {
            chebyshev_filter(op, degree, c, e, v, &mut filtered, &mut cheb);
            v.copy_from_slice(&filtered);
        }
        matvecs += degree * p;
    }
    Err(SpectralError::NotConverged {
        restarts: opts.max_restarts,
        converged: best.0,
        wanted: k,
        worst_residual: best.1,
    })
}

/// `exp(-τS) v` by Krylov projection with adaptive substeps; dense for
/// small operators.
pub fn expm_action(
    op: &GridOperator,
    v: &[f64],
    tau: f64,
    tol: f64,
) -> Result<Vec<f64>, SpectralError> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(SpectralError::InvalidRequest(format!(
            "imaginary time {tau} must be nonnegative"
        )));
    }
    let dim = op.dim();
    if dim <= 2000 {
        let eig = SymmetricEigen::new(op.matrix().to_dense());
        let x = nalgebra::DVector::from_column_slice(v);
        let c = eig.eigenvectors.transpose() * x;
        let d = nalgebra::DVector::from_iterator(
            dim,
            eig.eigenvalues
                .iter()
                .zip(c.iter())
                .map(|(l, c)| (-tau * l).exp() * c),
        );
        return Ok((eig.eigenvectors * d).iter().copied().collect());
    }
    let m = 40usize.min(dim - 1);
    let mut x = v.to_vec();
    let mut done = 0.0;
    let mut dt = tau;
    let mut w = vec![0.0; dim];
    while done < tau {
        dt = dt.min(tau - done);
        let xn = norm(&x);
        if xn == 0.0 {
            return Ok(x);
        }
        let mut basis = vec![x.iter().map(|a| a / xn).collect::<Vec<f64>>()];
        let mut t = DMatrix::<f64>::zeros(m, m);
        let mut beta = 0.0;
        let mut size = m;
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            let coef = orthogonalize(&basis, &mut w);
            for (i, c) in coef.iter().enumerate() {
                t[(i, j)] = *c;
                t[(j, i)] = *c;
            }
            beta = norm(&w);
            if beta < 1e-13 * t[(j, j)].abs().max(1.0) {
                size = j + 1;
                beta = 0.0;
                break;
            }
            if j + 1 < m {
                basis.push(w.iter().map(|a| a / beta).collect());
            }
        }
        let small = t.view((0, 0), (size, size)).into_owned();
        let eig = SymmetricEigen::new(small);
        loop {
            let coeffs: Vec<f64> = (0..size)
                .map(|l| {
                    (0..size)
                        .map(|i| {
                            eig.eigenvectors[(l, i)]
                                * (-dt * eig.eigenvalues[i]).exp()
                                * eig.eigenvectors[(0, i)]
                        })
                        .sum()
                })
                .collect();
            let err = (beta * coeffs[size - 1]).abs();
            if err <= tol * coeffs.iter().map(|c| c * c).sum::<f64>().sqrt() || dt < 1e-12 * tau {
                let mut next = vec![0.0; dim];
                for (c, b) in coeffs.iter().zip(&basis) {
                    axpy(c * xn, b, &mut next);
                }
                x = next;
                done += dt;
                if err < 0.01 * tol {
                    dt *= 2.0;
                }
                break;
            }
            dt *= 0.5;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{Coupling, CouplingModel};
    use crate::spectral::domain::DomainSpec;
    use crate::spectral::operator::build_sector;

    #[test]
    fn lanczos_matches_dense() {
        let dom = DomainSpec::boxed(2, 3.0, 40).unwrap();
        let op = build_sector(&dom, &CouplingModel::uniform(2, Coupling::Robin(-1.0))).unwrap();
        let dense = solve_dense(&op, 6, false).unwrap();
        let opts = SolverOptions {
            dense_below: 0,
            ..Default::default()
        };
        let sparse = solve(&op, 6, &opts).unwrap();
        for (a, b) in dense.eigenvalues.iter().zip(&sparse.eigenvalues) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        assert!(
            sparse.residuals.iter().all(|&r| r <= 1e-10),
            "{:?}",
            sparse.residuals
        );
        let again = solve(&op, 6, &opts).unwrap();
        assert_eq!(sparse, again);
    }

    #[test]
    fn expm_against_dense() {
        let dom = DomainSpec::boxed(2, 3.0, 70).unwrap();
        let op = build_sector(&dom, &CouplingModel::uniform(2, Coupling::Robin(-1.0))).unwrap();
        assert!(op.dim() > 2000);
        let v: Vec<f64> = (0..op.dim())
            .map(|i| ((i * 7919) % 97) as f64 / 97.0)
            .collect();
        let krylov = expm_action(&op, &v, 0.3, 1e-12).unwrap();
        let eig = SymmetricEigen::new(op.matrix().to_dense());
        let x = nalgebra::DVector::from_column_slice(&v);
        let c = eig.eigenvectors.transpose() * x;
        let d = nalgebra::DVector::from_iterator(
            op.dim(),
            eig.eigenvalues
                .iter()
                .zip(c.iter())
                .map(|(l, c)| (-0.3 * l).exp() * c),
        );
        let exact = eig.eigenvectors * d;
        let err = krylov
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9 * exact.amax(), "{err}");
    }
}
