//! Adaptive Gauss-Kronrod quadrature in one dimension and iterated
//! (nested) quadrature over boxes with variable inner limits.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: estimate {value:e} with error {error:e} after {subdivisions} subdivisions")]
    NotConverged {
        value: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand returned a non-finite value at {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureOptions {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
) -> Result<(f64, f64), QuadratureError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: centre });
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut samples = [0.0f64; 15];
    samples[14] = fc;
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        if !f1.is_finite() || !f2.is_finite() {
            return Err(QuadratureError::NonFinite { at: centre - dx });
        }
        samples[2 * i] = f1;
        samples[2 * i + 1] = f2;
        kronrod += w * (f1 + f2);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    // QUADPACK error scaling: |K15 - G7| grossly overestimates the error of
    // K15 on smooth integrands
    let mean = 0.5 * kronrod;
    let mut spread = WGK[7] * (fc - mean).abs();
    let mut magnitude = WGK[7] * fc.abs();
    for i in 0..7 {
        spread += WGK[i] * ((samples[2 * i] - mean).abs() + (samples[2 * i + 1] - mean).abs());
        magnitude += WGK[i] * (samples[2 * i].abs() + samples[2 * i + 1].abs());
    }
    let spread = spread * half.abs();
    let magnitude = magnitude * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if spread > 0.0 && error > 0.0 {
        error = spread * (200.0 * error / spread).powf(1.5).min(1.0);
    }
    if magnitude > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * magnitude);
    }
    Ok((value, error))
}

/// Globally adaptive G7-K15 integration of `f` over `[a, b]`.
///
/// `breakpoints` inside `(a, b)` split the interval up front, which is how
/// integrands with jumps or kinks on known hyperplanes are handled.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadratureOptions,
) -> Result<Estimate, QuadratureError> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = kronrod15(&mut f, w[0], w[1])?;
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let mut subdivisions = 0;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(QuadratureError::NotConverged {
                value: sign * total,
                error: total_err,
                subdivisions,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision; accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod15(&mut f, mid, worst.b)?;
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut value = 0.0;
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    Ok(Estimate {
        value: sign * value,
        error,
        evaluations,
    })
}

/// Integration region for [`integrate_nested`].
///
/// Coordinate `k` is integrated between `limits(k, outer)` where `outer`
/// holds the already-fixed coordinates `0..k`. Breakpoints for coordinate `k`
/// are appended by `breakpoints(k, outer, &mut out)`.
pub trait NestedRegion {
    fn dim(&self) -> usize;
    fn limits(&self, k: usize, outer: &[f64]) -> (f64, f64);
    fn breakpoints(&self, _k: usize, _outer: &[f64], _out: &mut Vec<f64>) {}
}

/// Axis-aligned box, optionally splitting every inner coordinate at the
/// values of the outer ones (coincidence hyperplanes).
#[derive(Debug, Clone)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub split_at_coincidences: bool,
}

impl NestedRegion for BoxRegion {
    fn dim(&self) -> usize {
        self.lower.len()
    }
    fn limits(&self, k: usize, _outer: &[f64]) -> (f64, f64) {
        (self.lower[k], self.upper[k])
    }
    fn breakpoints(&self, _k: usize, outer: &[f64], out: &mut Vec<f64>) {
        if self.split_at_coincidences {
            out.extend_from_slice(outer);
        }
    }
}

/// The ordered region `hi >= y_1 > y_2 > ... > y_n >= lo` of a cube.
#[derive(Debug, Clone)]
pub struct OrderedRegion {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl NestedRegion for OrderedRegion {
    fn dim(&self) -> usize {
        self.n
    }
    fn limits(&self, k: usize, outer: &[f64]) -> (f64, f64) {
        if k == 0 {
            (self.lo, self.hi)
        } else {
            (self.lo, outer[k - 1])
        }
    }
}

/// Iterated adaptive quadrature over a [`NestedRegion`].
///
/// Inner integrals are computed to a tighter tolerance than the outer one so
/// that their errors stay subdominant.
pub fn integrate_nested<R, F>(
    region: &R,
    f: F,
    opts: &QuadratureOptions,
) -> Result<Estimate, QuadratureError>
where
    R: NestedRegion + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let dim = region.dim();
    let point = RefCell::new(vec![0.0; dim]);
    let failure: RefCell<Option<QuadratureError>> = RefCell::new(None);
    let evaluations = RefCell::new(0usize);
    let est = nested_level(region, &f, opts, 0, &point, &failure, &evaluations)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Estimate {
        evaluations: evaluations.into_inner(),
        ..est
    })
}

fn nested_level<R, F>(
    region: &R,
    f: &F,
    opts: &QuadratureOptions,
    k: usize,
    point: &RefCell<Vec<f64>>,
    failure: &RefCell<Option<QuadratureError>>,
    evaluations: &RefCell<usize>,
) -> Result<Estimate, QuadratureError>
where
    R: NestedRegion + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let dim = region.dim();
    let (a, b) = {
        let p = point.borrow();
        region.limits(k, &p[..k])
    };
    let mut breaks = Vec::new();
    {
        let p = point.borrow();
        region.breakpoints(k, &p[..k], &mut breaks);
    }
    if k + 1 == dim {
        let est = integrate(
            |t| {
                let mut p = point.borrow_mut();
                p[k] = t;
                *evaluations.borrow_mut() += 1;
                f(&p)
            },
            a,
            b,
            &breaks,
            opts,
        )?;
        return Ok(est);
    }
    let inner_opts = QuadratureOptions {
        rel_tol: opts.rel_tol * 0.1,
        abs_tol: opts.abs_tol * 0.1 / (b - a).abs().max(1.0),
        max_subdivisions: opts.max_subdivisions,
    };
    integrate(
        |t| {
            point.borrow_mut()[k] = t;
            if failure.borrow().is_some() {
                return 0.0;
            }
            match nested_level(region, f, &inner_opts, k + 1, point, failure, evaluations) {
                Ok(e) => e.value,
                Err(err) => {
                    *failure.borrow_mut() = Some(err);
                    0.0
                }
            }
        },
        a,
        b,
        &breaks,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(
            |x| x.powi(5) - 3.0 * x * x,
            -1.0,
            2.0,
            &[],
            &QuadratureOptions::default(),
        )
        .unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((est.value - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_on_line() {
        let est = integrate(
            |x| (-x * x).exp(),
            -40.0,
            40.0,
            &[],
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn breakpoint_resolves_jump() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let est = integrate(f, 0.0, 1.0, &[0.3], &QuadratureOptions::default()).unwrap();
        assert!((est.value - 1.7).abs() < 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let est = integrate(|x| x, 1.0, 0.0, &[], &QuadratureOptions::default()).unwrap();
        assert!((est.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn ordered_simplex_volume() {
        // volume of {1 >= y1 > y2 > y3 >= 0} is 1/6
        let region = OrderedRegion {
            n: 3,
            lo: 0.0,
            hi: 1.0,
        };
        let est = integrate_nested(&region, |_| 1.0, &QuadratureOptions::default()).unwrap();
        assert!((est.value - 1.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let opts = QuadratureOptions {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let err = integrate(
            |x: f64| x.abs().sqrt().sin() / (x.abs() + 1e-9),
            -1.0,
            1.0,
            &[],
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, QuadratureError::NotConverged { .. }));
    }
}
