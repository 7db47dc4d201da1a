//! Spectral quantities of a single mode `(lambda, xi')`: characteristic
//! roots, decay rates, the degeneracy point and sector membership.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::C64;

/// Relative width of the band around eta in which the confluent branch is used.
pub const DEGENERACY_THRESHOLD: f64 = 1e-4;

/// Characteristic polynomial `(lambda - z)(lambda + a - z) + beta^2/2 (z^2 - a z)`.
pub fn char_poly(params: &ModelParams, lambda: C64, z: C64) -> C64 {
    let a = params.a;
    (lambda - z) * (lambda + a - z) + 0.5 * params.beta * params.beta * (z * z - a * z)
}

/// Both roots of the characteristic polynomial, `z1` with the `+` sign.
///
/// The root of larger modulus is taken from the quadratic formula and the
/// other from the product of the roots, which avoids cancellation.
pub fn characteristic_roots(params: &ModelParams, lambda: C64) -> (C64, C64) {
    let a = params.a;
    let c = params.c_beta();
    let b2 = params.beta * params.beta;
    let s = 2.0 * lambda + a * c;
    let disc = (C64::from(a * a * c * c) - 2.0 * b2 * lambda * lambda).sqrt();
    let mut zp = (s + disc) / (2.0 * c);
    let mut zm = (s - disc) / (2.0 * c);
    let prod = lambda * (lambda + a) / c;
    if zp.norm() >= zm.norm() {
        if zp.norm() > 0.0 {
            zm = prod / zp;
        }
    } else {
        zp = prod / zm;
    }
    (zp, zm)
}

/// Real point on the positive axis where the two roots coincide.
pub fn eta_point(params: &ModelParams) -> Result<f64> {
    if params.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    Ok(params.a * params.c_beta() / (std::f64::consts::SQRT_2 * params.beta.abs()))
}

/// Roots scaled by `lambda + a` together with their large-|lambda| limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalizedRoots {
    pub z1_tilde: C64,
    pub z2_tilde: C64,
    pub z_minus: C64,
    pub z_plus: C64,
}

pub fn normalized_roots(params: &ModelParams, lambda: C64) -> NormalizedRoots {
    let (z1, z2) = characteristic_roots(params, lambda);
    let w = lambda + params.a;
    let c = params.c_beta();
    let im = params.beta.abs() * std::f64::consts::SQRT_2;
    NormalizedRoots {
        z1_tilde: z1 / w,
        z2_tilde: z2 / w,
        z_minus: C64::new(2.0, -im) / (2.0 * c),
        z_plus: C64::new(2.0, im) / (2.0 * c),
    }
}

/// Membership of `lambda` in the sector `|arg lambda| < pi - theta, |lambda| > r`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectorReport {
    pub inside: bool,
    /// Signed distance to the sector boundary, positive inside.
    pub distance: f64,
    pub theta0: f64,
}

pub fn sector_admissibility(params: &ModelParams, lambda: C64) -> SectorReport {
    let opening = std::f64::consts::PI - params.theta;
    let arg = lambda.arg().abs();
    let radial = lambda.norm() - params.r;
    // distance from lambda to the boundary ray at angle `opening`
    let ray = C64::from_polar(1.0, opening);
    let z = C64::new(lambda.re, lambda.im.abs()) * ray.conj();
    let ray_dist = if z.re > 0.0 { z.im.abs() } else { lambda.norm() };
    let inside = arg < opening && radial > 0.0;
    let distance = if inside {
        radial.min(ray_dist)
    } else {
        -(radial.min(0.0).abs().max(if arg >= opening { ray_dist } else { 0.0 }))
    };
    SectorReport { inside, distance, theta0: params.theta0() }
}

/// Everything attached to one tangential mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeContext {
    pub lambda: C64,
    pub xi_prime: Vec<f64>,
    pub dim: usize,
    /// Reaction coefficient, kept so that `lambda + a` is formed exactly.
    pub a: f64,
    /// `|xi'|`.
    pub a_abs: f64,
    pub b_a: C64,
    pub z1: C64,
    pub z2: C64,
    pub l1: C64,
    pub l2: C64,
    pub eta: Option<f64>,
    pub degenerate: bool,
}

impl ModeContext {
    pub fn new(params: &ModelParams, lambda: C64, xi_prime: &[f64]) -> Result<Self> {
        let dim = params.dim;
        if xi_prime.len() != dim - 1 {
            return Err(Error::InvalidInput(format!("xi' has length {} but dimension is {}", xi_prime.len(), dim)));
        }
        let a_abs = xi_prime.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a2 = a_abs * a_abs;
        let b_a = (lambda + params.a + a2).sqrt();
        let (z1, z2) = characteristic_roots(params, lambda);
        let l1 = (z1 + a2).sqrt();
        let l2 = (z2 + a2).sqrt();
        let fmt = || format!("{lambda}");
        if !(b_a.re > 0.0) {
            return Err(Error::BranchViolation { what: "B_a", lambda: fmt() });
        }
        if !(l1.re > 0.0) {
            return Err(Error::BranchViolation { what: "L1", lambda: fmt() });
        }
        if !(l2.re > 0.0) {
            return Err(Error::BranchViolation { what: "L2", lambda: fmt() });
        }
        let eta = eta_point(params).ok();
        let degenerate = eta.is_some_and(|e| (lambda - e).norm() <= DEGENERACY_THRESHOLD * (1.0 + e));
        Ok(Self { lambda, xi_prime: xi_prime.to_vec(), dim, a: params.a, a_abs, b_a, z1, z2, l1, l2, eta, degenerate })
    }

    /// Slowest decay rate among the exponentials present in the profile.
    pub fn min_decay(&self) -> f64 {
        let mut m = self.b_a.re.min(self.l1.re).min(self.l2.re);
        if self.a_abs > 0.0 {
            m = m.min(self.a_abs);
        }
        m
    }

    /// Default truncation length of the normal interval.
    pub fn x_max(&self) -> f64 {
        40.0 / self.min_decay()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn decoupled_roots_factor() {
        let p = ModelParams::new(1.0, 0.0, 2);
        let (z1, z2) = characteristic_roots(&p, C64::new(2.0, 0.0));
        assert!(close(z1, C64::new(3.0, 0.0), 1e-14));
        assert!(close(z2, C64::new(2.0, 0.0), 1e-14));
    }

    #[test]
    fn roots_coincide_at_eta() {
        let p = ModelParams::new(1.0, std::f64::consts::SQRT_2, 2);
        let eta = eta_point(&p).unwrap();
        assert!((eta - 1.0).abs() < 1e-15);
        let (z1, z2) = characteristic_roots(&p, C64::new(eta, 0.0));
        assert!(close(z1, C64::new(1.0, 0.0), 1e-7));
        assert!(close(z2, C64::new(1.0, 0.0), 1e-7));
    }

    #[test]
    fn eta_values() {
        let s2 = std::f64::consts::SQRT_2;
        assert!((eta_point(&ModelParams::new(2.0, s2, 2)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(eta_point(&ModelParams::new(1.0, 0.0, 2)), Err(Error::BetaZero));
    }

    #[test]
    fn complex_roots_back_substitute() {
        let p = ModelParams::new(1.0, 1.0, 2);
        let lam = C64::new(3.0, 4.0);
        let (z1, z2) = characteristic_roots(&p, lam);
        assert!(char_poly(&p, lam, z1).norm() < 1e-12 * 49.0);
        assert!(char_poly(&p, lam, z2).norm() < 1e-12 * 49.0);
    }

    #[test]
    fn wave_numbers_at_zero_frequency() {
        let p = ModelParams::new(1.0, 0.0, 2);
        let m = ModeContext::new(&p, C64::new(2.0, 0.0), &[0.0]).unwrap();
        assert_eq!(m.a_abs, 0.0);
        assert!(close(m.b_a, C64::new(3f64.sqrt(), 0.0), 1e-15));
        assert!(close(m.l1, C64::new(3f64.sqrt(), 0.0), 1e-15));
        assert!(close(m.l2, C64::new(2f64.sqrt(), 0.0), 1e-15));
    }

    #[test]
    fn degenerate_wave_numbers() {
        let p = ModelParams::new(1.0, std::f64::consts::SQRT_2, 2);
        let m = ModeContext::new(&p, C64::new(1.0, 0.0), &[2.0]).unwrap();
        assert!(m.degenerate);
        assert!(close(m.l1, C64::new(5f64.sqrt(), 0.0), 1e-7));
        assert!(close(m.l2, C64::new(5f64.sqrt(), 0.0), 1e-7));
    }

    #[test]
    fn imaginary_lambda_positive_real_parts() {
        let p = ModelParams::new(1.0, 1.0, 3);
        let m = ModeContext::new(&p, C64::new(0.0, 10.0), &[1.0, 0.0]).unwrap();
        assert!(m.b_a.re > 0.0 && m.l1.re > 0.0 && m.l2.re > 0.0);
    }

    #[test]
    fn normalized_limits() {
        let p = ModelParams::new(1.0, 1.0, 2);
        let n = normalized_roots(&p, C64::new(1e6, 0.0));
        let target_a = C64::new(2.0, 2f64.sqrt()) / 3.0;
        let target_b = C64::new(2.0, -(2f64.sqrt())) / 3.0;
        assert!(close(n.z1_tilde, target_a, 1e-4) && close(n.z2_tilde, target_b, 1e-4));
        assert!(close(n.z_plus, target_a, 1e-15));
        let p0 = ModelParams::new(1.0, 0.0, 2);
        let n0 = normalized_roots(&p0, C64::new(5.0, 0.0));
        assert!(close(n0.z1_tilde, C64::new(1.0, 0.0), 1e-15));
        assert!(close(n0.z2_tilde, C64::new(5.0 / 6.0, 0.0), 1e-15));
    }

    #[test]
    fn sector_membership() {
        let p = ModelParams::default();
        assert!(sector_admissibility(&p, C64::new(2.0, 0.0)).inside);
        assert!(!sector_admissibility(&p, C64::new(0.5, 0.0)).inside);
        assert!(!sector_admissibility(&p, C64::new(-5.0, 0.1)).inside);
        let p2 = ModelParams { beta: std::f64::consts::SQRT_2, ..p };
        assert!((sector_admissibility(&p2, C64::new(2.0, 0.0)).theta0 - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }
}
