//! Scaled complementary error function.

use libm::erfc;

/// `erfcx(z) = exp(z²) erfc(z)`.
///
/// Direct evaluation up to `z = 25`, where `exp(z²)` is still finite and
/// `erfc` keeps full relative accuracy; the asymptotic series beyond.
pub fn erfcx(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        // erfc(-z) = 2 - erfc(z)
        return 2.0 * (z * z).exp() - erfcx(-z);
    }
    if z <= 25.0 {
        return (z * z).exp() * erfc(z);
    }
    let inv = 1.0 / (2.0 * z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum / (z * std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_values() {
        // erfcx(0) = 1, erfcx(1) = e·erfc(1)
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
        assert!((erfcx(1.0) - 0.427_583_576_155_807).abs() < 1e-14);
        assert!((erfcx(10.0) - 0.056_140_992_743_822_59).abs() < 1e-15);
        assert!((erfcx(-1.0) - 5.008_980_080_762_283).abs() < 1e-13);
    }

    #[test]
    fn branches_join_smoothly() {
        let a = erfcx(25.0);
        let b = erfcx(25.0 + 1e-9);
        assert!(((a - b) / a).abs() < 1e-9);
        // large z: ~ 1/(z sqrt(pi))
        let z = 1e6;
        assert!((erfcx(z) * z * std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-12);
    }
}
