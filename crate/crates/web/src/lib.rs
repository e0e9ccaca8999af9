//! Browser front end: three small computations returning JSON.
//!
//! The `#[wasm_bindgen]` exports only forward to the plain functions in
//! [`api`], which carry the logic and the tests.

use wasm_bindgen::prelude::*;

pub mod api {
    use contact_duality::boundary::{Coupling, CouplingModel};
    use contact_duality::propagator::{
        delta_pair_kernel, epsilon_pair_kernel, permutation_sum, robin_relative_kernel,
    };
    use contact_duality::spectral::{build, formulations_for, solve, DomainSpec, SolverOptions};
    use contact_duality::statistics::Statistics;
    use serde::Serialize;

    /// Largest sector dimension solved in the browser.
    pub const DIMENSION_CAP: usize = 40_000;
    /// Largest sample count of a curve.
    pub const POINT_CAP: usize = 4001;

    fn coupling(a: f64) -> Result<Coupling, String> {
        if a.is_nan() {
            Err("a is NaN".into())
        } else if a == 0.0 {
            Ok(Coupling::Dirichlet)
        } else if a.is_infinite() {
            Ok(Coupling::Neumann)
        } else {
            Ok(Coupling::Robin(a))
        }
    }

    fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(format!(
                "need a finite range with hi > lo, got [{lo}, {hi}]"
            ));
        }
        if !(2..=POINT_CAP).contains(&points) {
            return Err(format!("points must be in 2..={POINT_CAP}, got {points}"));
        }
        Ok((0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect())
    }

    fn json<T: Serialize>(v: &T) -> Result<String, String> {
        serde_json::to_string(v).map_err(|e| e.to_string())
    }

    #[derive(Serialize)]
    struct Level {
        formulation: &'static str,
        eigenvalues: Vec<f64>,
    }

    #[derive(Serialize)]
    struct SectorSpectrum {
        n: usize,
        h: f64,
        dimension: usize,
        levels: Vec<Level>,
        max_relative_deviation: f64,
    }

    /// Lowest `k` levels of every formulation for `n` particles in a box of
    /// the given length, all faces with Robin length `a` (`0`: hard core).
    pub fn sector_spectrum(
        n: usize,
        length: f64,
        cells: usize,
        a: f64,
        k: usize,
    ) -> Result<String, String> {
        if !(2..=3).contains(&n) {
            return Err(format!("n must be 2 or 3 here, got {n}"));
        }
        if !(1..=12).contains(&k) {
            return Err(format!("k must be in 1..=12, got {k}"));
        }
        let dom = DomainSpec::boxed(n, length, cells).map_err(|e| e.to_string())?;
        let estimate = (1..=n).fold(1usize, |d, i| d * (cells + i - 1) / i);
        if estimate > DIMENSION_CAP {
            return Err(format!(
                "grid too large for the browser: about {estimate} nodes (cap {DIMENSION_CAP})"
            ));
        }
        let model = CouplingModel::new(vec![coupling(a)?; n - 1]).map_err(|e| e.to_string())?;
        let opts = SolverOptions {
            keep_vectors: false,
            ..SolverOptions::default()
        };
        let mut levels = Vec::new();
        let mut dimension = 0;
        for f in formulations_for(&model) {
            let op = build(f, &dom, &model).map_err(|e| e.to_string())?;
            let s = solve(&op, k, &opts).map_err(|e| e.to_string())?;
            dimension = dimension.max(s.dimension);
            levels.push(Level {
                formulation: f.name(),
                eigenvalues: s.eigenvalues,
            });
        }
        let mut dev = 0.0f64;
        for x in &levels {
            for y in &levels {
                for (p, q) in x.eigenvalues.iter().zip(&y.eigenvalues) {
                    dev = dev.max((p - q).abs() / p.abs().max(q.abs()).max(1e-300));
                }
            }
        }
        json(&SectorSpectrum {
            n,
            h: dom.spacing(),
            dimension,
            levels,
            max_relative_deviation: dev,
        })
    }

    #[derive(Serialize)]
    struct KernelProfile {
        a: f64,
        tau: f64,
        v: f64,
        u: Vec<f64>,
        robin: Vec<f64>,
        neumann: Vec<f64>,
        dirichlet: Vec<f64>,
        /// `∂_u K - K/(2a)` at `u = 0` by a one-sided difference, relative to
        /// the diagonal scale.
        boundary_residual: f64,
    }

    /// Relative-coordinate kernel `K(u, v; τ)` on the half-line
    /// `u = x1 - x2 > 0` for Robin length `a` (`∂_u K = K/(2a)` at the face),
    /// with the Neumann and Dirichlet kernels alongside.
    pub fn robin_kernel_profile(
        a: f64,
        tau: f64,
        v: f64,
        u_max: f64,
        points: usize,
    ) -> Result<String, String> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(format!("tau must be positive, got {tau}"));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(format!("source v must be on the half-line, got {v}"));
        }
        let c = coupling(a)?;
        let u = grid(0.0, u_max, points)?;
        let k = robin_relative_kernel(c).map_err(|e| e.to_string())?;
        let kn = robin_relative_kernel(Coupling::Neumann).map_err(|e| e.to_string())?;
        let kd = robin_relative_kernel(Coupling::Dirichlet).map_err(|e| e.to_string())?;
        let h = 1e-4 * tau.sqrt();
        // second-order one-sided derivative at the face
        let d = (-3.0 * k(0.0, v, tau) + 4.0 * k(h, v, tau) - k(2.0 * h, v, tau)) / (2.0 * h);
        let scale = k(v, v, tau).abs().max(1e-300);
        let boundary_residual = match c {
            Coupling::Robin(a) => (d - k(0.0, v, tau) / (2.0 * a)).abs() / scale * tau.sqrt(),
            Coupling::Neumann => d.abs() / scale * tau.sqrt(),
            _ => k(0.0, v, tau).abs() / scale,
        };
        json(&KernelProfile {
            a,
            tau,
            v,
            robin: u.iter().map(|&x| k(x, v, tau)).collect(),
            neumann: u.iter().map(|&x| kn(x, v, tau)).collect(),
            dirichlet: u.iter().map(|&x| kd(x, v, tau)).collect(),
            u,
            boundary_residual,
        })
    }

    #[derive(Serialize)]
    struct BoseFermiSlice {
        a: f64,
        tau: f64,
        y: [f64; 2],
        x2: f64,
        x1: Vec<f64>,
        bose: Vec<f64>,
        fermi: Vec<f64>,
        /// Permutation sums on the sector `x1 > x2`; `null` outside it.
        bose_sum: Vec<Option<f64>>,
        fermi_sum: Vec<Option<f64>>,
        max_sum_deviation: f64,
    }

    /// The δ-boson and ε-fermion kernels of a pair along `x1` with `x2`
    /// fixed, and their character-weighted sums on the sector.
    #[allow(clippy::too_many_arguments)]
    pub fn bose_fermi_slice(
        a: f64,
        tau: f64,
        y1: f64,
        y2: f64,
        x2: f64,
        x_min: f64,
        x_max: f64,
        points: usize,
    ) -> Result<String, String> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(format!("tau must be positive, got {tau}"));
        }
        let c = match coupling(a)? {
            Coupling::Robin(v) => Coupling::Robin(v),
            _ => return Err("the δ/ε pair needs a finite nonzero a".into()),
        };
        if !(y1 > y2) {
            return Err(format!(
                "source must lie in the sector y1 > y2, got ({y1}, {y2})"
            ));
        }
        let x1 = grid(x_min, x_max, points)?;
        let kb = delta_pair_kernel(2, c).map_err(|e| e.to_string())?;
        let kf = epsilon_pair_kernel(2, c).map_err(|e| e.to_string())?;
        let sb = permutation_sum(&kb, Statistics::Bose).map_err(|e| e.to_string())?;
        let sf = permutation_sum(&kf, Statistics::Fermi).map_err(|e| e.to_string())?;
        let y = [y1, y2];
        let mut out = BoseFermiSlice {
            a,
            tau,
            y,
            x2,
            x1: x1.clone(),
            bose: Vec::with_capacity(points),
            fermi: Vec::with_capacity(points),
            bose_sum: Vec::with_capacity(points),
            fermi_sum: Vec::with_capacity(points),
            max_sum_deviation: 0.0,
        };
        let scale = kb.evaluate(&y, &y, tau).abs().max(1e-300);
        for &t in &x1 {
            let x = [t, x2];
            out.bose.push(kb.evaluate(&x, &y, tau));
            out.fermi.push(kf.evaluate(&x, &y, tau));
            if t > x2 {
                let b = sb.evaluate(&x, &y, tau);
                let f = sf.evaluate(&x, &y, tau);
                out.max_sum_deviation = out.max_sum_deviation.max((b - f).abs() / scale);
                out.bose_sum.push(Some(b));
                out.fermi_sum.push(Some(f));
            } else {
                out.bose_sum.push(None);
                out.fermi_sum.push(None);
            }
        }
        json(&out)
    }
}

#[wasm_bindgen]
pub fn sector_spectrum(
    n: usize,
    length: f64,
    cells: usize,
    a: f64,
    k: usize,
) -> Result<String, JsValue> {
    api::sector_spectrum(n, length, cells, a, k).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn robin_kernel_profile(
    a: f64,
    tau: f64,
    v: f64,
    u_max: f64,
    points: usize,
) -> Result<String, JsValue> {
    api::robin_kernel_profile(a, tau, v, u_max, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn bose_fermi_slice(
    a: f64,
    tau: f64,
    y1: f64,
    y2: f64,
    x2: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<String, JsValue> {
    api::bose_fermi_slice(a, tau, y1, y2, x2, x_min, x_max, points)
        .map_err(|e| JsValue::from_str(&e))
}
