//! Hand-derived reference values of the scalar functions.

use halfspace::scalars::{eval_cal_a, f_a, f_a_limit, g_a};
use halfspace::symbols::{characteristic_roots, eta_point, ModeContext};
use halfspace::{ModelParams, C64};

#[test]
fn velocity_denominator_at_zero_frequency_without_coupling() {
    // With A = 0 the denominator is B^3 (L1 + L2); B = sqrt(3), L = sqrt(2), sqrt(3).
    let p = ModelParams::new(1.0, 0.0, 2);
    let m = ModeContext::new(&p, C64::new(2.0, 0.0), &[0.0]).unwrap();
    let expect = 3.0 * 3f64.sqrt() * (3f64.sqrt() + 2f64.sqrt());
    assert!((eval_cal_a(&m) - expect).norm() < 1e-12 * expect);
}

#[test]
fn uncoupled_roots_are_lambda_and_lambda_plus_a() {
    let p = ModelParams::new(1.5, 0.0, 2);
    let (z1, z2) = characteristic_roots(&p, C64::new(2.0, 1.0));
    let mut got = [z1, z2];
    got.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    assert!((got[0] - C64::new(2.0, 1.0)).norm() < 1e-14);
    assert!((got[1] - C64::new(3.5, 1.0)).norm() < 1e-14);
}

#[test]
fn double_root_location() {
    // Discriminant zero of the coupled quadratic at a = beta = 1: eta = 3 / (2 sqrt 2).
    let p = ModelParams::new(1.0, 1.0, 2);
    let eta = eta_point(&p).unwrap();
    assert!((eta - 1.5 / 2f64.sqrt()).abs() < 1e-14, "{eta}");
    let (z1, z2) = characteristic_roots(&p, C64::new(eta, 0.0));
    assert!((z1 - z2).norm() < 1e-6);
}

#[test]
fn denominators_at_zero_t() {
    // At t = 0 the velocity denominator reduces to sqrt(z1) + sqrt(z2) in normalised roots.
    let p = ModelParams::new(1.0, 0.5, 2);
    let lam = C64::new(4.0, 0.0);
    let f = f_a(&p, lam, C64::new(0.0, 0.0));
    let g = g_a(&p, lam, C64::new(0.0, 0.0));
    assert!(f.norm() > 0.1 && f.is_finite());
    let w = lam + p.a;
    let (z1, z2) = characteristic_roots(&p, lam);
    let expect = (z1 / w).sqrt() + (z2 / w).sqrt();
    assert!((g - expect).norm() < 1e-12, "{g} vs {expect}");
    let lim = f_a_limit(z1 / w, z2 / w);
    assert!(lim.is_finite());
}
