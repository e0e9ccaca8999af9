use contact_duality_web::api::{bose_fermi_slice, robin_kernel_profile, sector_spectrum};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("call succeeds")).expect("valid json")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn hard_core_pair_matches_free_fermion_box() {
    // (k1² + k2²)/2 for 1 <= k1 < k2 in a box of length π
    let v = parse(sector_spectrum(2, std::f64::consts::PI, 80, 0.0, 4));
    let exact = [2.5, 5.0, 6.5, 8.5];
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    for l in levels {
        for (e, x) in floats(&l["eigenvalues"]).iter().zip(exact) {
            assert!((e - x).abs() / x < 5e-3, "{} {e} vs {x}", l["formulation"]);
        }
    }
    assert!(v["max_relative_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn spectrum_rejects_bad_requests() {
    assert!(sector_spectrum(5, 1.0, 10, -1.0, 2).is_err());
    assert!(sector_spectrum(2, -1.0, 10, -1.0, 2).is_err());
    assert!(sector_spectrum(3, 5.0, 500, -1.0, 2)
        .unwrap_err()
        .contains("too large"));
    assert!(sector_spectrum(2, 5.0, 10, f64::NAN, 2).is_err());
}

fn heat(s: f64, tau: f64) -> f64 {
    (-s * s / (4.0 * tau)).exp() / (4.0 * std::f64::consts::PI * tau).sqrt()
}

#[test]
fn kernel_profile_limits() {
    let (tau, v) = (0.4, 0.7);
    let p = parse(robin_kernel_profile(-1.0, tau, v, 4.0, 81));
    let u = floats(&p["u"]);
    let n = floats(&p["neumann"]);
    let d = floats(&p["dirichlet"]);
    for ((x, kn), kd) in u.iter().zip(&n).zip(&d) {
        // images: G(u-v) ± G(u+v)
        assert!((kn - (heat(x - v, tau) + heat(x + v, tau))).abs() < 1e-14);
        assert!((kd - (heat(x - v, tau) - heat(x + v, tau))).abs() < 1e-14);
    }
    assert!(d[0].abs() < 1e-15);
    assert!(p["boundary_residual"].as_f64().unwrap() < 1e-6);
    // a very weak contact is close to Neumann
    let w = parse(robin_kernel_profile(1e6, tau, v, 4.0, 81));
    for (a, b) in floats(&w["robin"]).iter().zip(&n) {
        assert!((a - b).abs() < 1e-5);
    }
    assert!(robin_kernel_profile(1.0, 0.0, v, 4.0, 81).is_err());
    assert!(robin_kernel_profile(1.0, tau, -1.0, 4.0, 81).is_err());
    assert!(robin_kernel_profile(1.0, tau, v, 4.0, 1).is_err());
}

#[test]
fn bose_and_fermi_sums_coincide_on_the_sector() {
    let s = parse(bose_fermi_slice(-1.0, 0.3, 0.9, -0.4, 0.1, -2.0, 2.0, 201));
    assert!(s["max_sum_deviation"].as_f64().unwrap() < 1e-12);
    let x1 = floats(&s["x1"]);
    let i = x1.iter().position(|&t| t > 0.1).unwrap();
    let sums = s["bose_sum"].as_array().unwrap();
    assert!(sums[..i].iter().all(Value::is_null));
    assert!(sums[i..].iter().all(|v| v.is_f64()));

    // straddling x1 = x2: the boson kernel is continuous, the fermion one jumps
    let t = parse(bose_fermi_slice(
        -1.0,
        0.3,
        0.9,
        -0.4,
        0.1,
        0.1 - 1e-9,
        0.1 + 1e-9,
        2,
    ));
    let bose = floats(&t["bose"]);
    let fermi = floats(&t["fermi"]);
    assert!((bose[1] - bose[0]).abs() < 1e-7 * bose[0].abs());
    assert!((fermi[1] - fermi[0]).abs() > 1e-3 * fermi[0].abs());
    assert!(bose_fermi_slice(0.0, 0.3, 0.9, -0.4, 0.1, -2.0, 2.0, 11).is_err());
    assert!(bose_fermi_slice(-1.0, 0.3, -0.4, 0.9, 0.1, -2.0, 2.0, 11).is_err());
}
