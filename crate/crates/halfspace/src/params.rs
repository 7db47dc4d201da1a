//! Model constants and their validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and analytic constants of one run.
///
/// `beta` is the coupling in the linear system and `xi` the rotational
/// parameter of the nonlinear terms; they are tied by `beta = 2 xi / dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub a: f64,
    pub beta: f64,
    pub b: f64,
    pub c: f64,
    pub dim: usize,
    pub theta: f64,
    pub r: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            beta: 1.0,
            b: 1.0,
            c: 1.0,
            dim: 2,
            theta: std::f64::consts::FRAC_PI_3,
            r: 1.0,
            gamma: 2.0,
            p: 2.0,
            q: 2.0,
        }
    }
}

impl ModelParams {
    pub fn new(a: f64, beta: f64, dim: usize) -> Self {
        Self { a, beta, dim, ..Self::default() }
    }

    /// Rotational parameter implied by the coupling.
    pub fn xi(&self) -> f64 {
        self.beta * self.dim as f64 / 2.0
    }

    /// `1 + beta^2 / 2`, the leading coefficient of the characteristic polynomial.
    pub fn c_beta(&self) -> f64 {
        1.0 + 0.5 * self.beta * self.beta
    }

    /// Smallest admissible sector half-opening, `arctan(|beta| / sqrt 2)`.
    pub fn theta0(&self) -> f64 {
        (self.beta.abs() / std::f64::consts::SQRT_2).atan()
    }

    /// Checks the invariants needed by the coupled solution formulas.
    pub fn validate(&self) -> Result<()> {
        let bad = |key, reason: &str| Err(Error::InvalidParam { key, reason: reason.to_string() });
        if !(2..=3).contains(&self.dim) {
            return bad("dim", "dimension must be 2 or 3");
        }
        if !self.a.is_finite() || self.a < 0.0 {
            return bad("a", "must be finite and non-negative");
        }
        if self.beta != 0.0 && self.a <= 0.0 {
            return bad("a", "must be positive when beta is non-zero");
        }
        if !self.beta.is_finite() {
            return bad("beta", "must be finite");
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return bad("theta", "must lie in (0, pi/2)");
        }
        if self.theta.tan() < self.beta.abs() / std::f64::consts::SQRT_2 - 1e-12 {
            return bad("theta", "tan(theta) must be at least |beta|/sqrt(2)");
        }
        if !(self.r > 0.0) {
            return bad("r", "must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma", "must be non-negative");
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad("p", "must lie in (1, inf)");
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return bad("q", "must lie in (1, inf)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_narrow_sector() {
        let p = ModelParams { beta: 4.0, theta: 0.5, ..ModelParams::default() };
        assert!(matches!(p.validate(), Err(Error::InvalidParam { key: "theta", .. })));
    }

    #[test]
    fn xi_matches_beta() {
        let p = ModelParams::new(1.0, 1.0, 3);
        assert!((p.xi() - 1.5).abs() < 1e-15);
    }
}
