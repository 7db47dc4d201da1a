//! Divided difference of exponentials and its derivatives in `x`.
//!
//! `M(g1, g2, x) = (exp(-g1 x) - exp(-g2 x)) / (g1 - g2)`, which tends to
//! `-x exp(-g x)` as `g1 -> g2`.

use crate::C64;

/// Below this value of `|g1 - g2| x` the midpoint series is used.
const SERIES_SWITCH: f64 = 1e-3;

/// Stable evaluation of the divided difference of exponentials.
pub fn eval_m(g1: C64, g2: C64, x: f64) -> C64 {
    let delta = g1 - g2;
    if delta.norm() * x < SERIES_SWITCH {
        // -x e^{-gbar x} sinh(d)/d with d = delta x / 2
        let gbar = 0.5 * (g1 + g2);
        let d = 0.5 * delta * x;
        let d2 = d * d;
        let sinhc = 1.0 + d2 / 6.0 * (1.0 + d2 / 20.0 * (1.0 + d2 / 42.0));
        -x * (-gbar * x).exp() * sinhc
    } else {
        ((-g1 * x).exp() - (-g2 * x).exp()) / delta
    }
}

/// Coefficients `(c_n, d_n)` with `d^n/dx^n M = c_n M + d_n exp(-g1 x)`.
pub fn m_derivative_coeffs(g1: C64, g2: C64, n: usize) -> (C64, C64) {
    let mut c = C64::new(1.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for _ in 0..n {
        let c_next = -g2 * c;
        d = -c - g1 * d;
        c = c_next;
    }
    (c, d)
}

/// `d^n/dx^n M(g1, g2, x)`.
pub fn eval_m_derivative(g1: C64, g2: C64, x: f64, n: usize) -> C64 {
    let (c, d) = m_derivative_coeffs(g1, g2, n);
    c * eval_m(g1, g2, x) + d * (-g1 * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn frozen_values() {
        assert_eq!(eval_m(c(2.0), c(1.0), 0.0), c(0.0));
        assert!((eval_m(c(1.0), c(1.0), 1.0) - c(-(-1f64).exp())).norm() < 1e-16);
        let e = (-2f64).exp() - (-1f64).exp();
        assert!((eval_m(c(2.0), c(1.0), 1.0) - c(e)).norm() < 1e-16);
        assert!((e + 0.2325441579).abs() < 1e-9);
    }

    #[test]
    fn series_and_direct_agree_at_switch() {
        let g1 = C64::new(1.3, 0.7);
        for &dx in &[0.999e-3, 1.001e-3] {
            let g2 = g1 + C64::new(0.0, dx);
            let x = 1.0;
            let direct = ((-g1 * x).exp() - (-g2 * x).exp()) / (g1 - g2);
            let v = eval_m(g1, g2, x);
            assert!((v - direct).norm() / v.norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_recursion_matches_difference_quotient() {
        let g1 = C64::new(2.0, 1.0);
        let g2 = C64::new(1.0, -0.5);
        let x = 0.7;
        let h = 1e-5;
        for n in 0..3 {
            let fd = (eval_m_derivative(g1, g2, x + h, n) - eval_m_derivative(g1, g2, x - h, n)) / (2.0 * h);
            let an = eval_m_derivative(g1, g2, x, n + 1);
            assert!((fd - an).norm() < 1e-8 * (1.0 + an.norm()));
        }
    }

    #[test]
    fn confluent_derivative() {
        // d/dx (-x e^{-x}) = (x - 1) e^{-x}
        let x = 0.4;
        let v = eval_m_derivative(c(1.0), c(1.0), x, 1);
        assert!((v - c((x - 1.0) * (-x).exp())).norm() < 1e-15);
    }
}
