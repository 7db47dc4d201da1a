//! Mode profiles `u(x), p(x), Q(x)` as sums of exponential terms, their
//! exact derivatives in the normal variable, and the residual of the mode
//! ODE system.

use serde::{Deserialize, Serialize};

use crate::assembly::{AmplitudeSet, BoundaryModeData, ModeSolution};
use crate::kernel::eval_m_derivative;
use crate::params::ModelParams;
use crate::symbols::ModeContext;
use crate::tensor::{add_mat, add_vec, scale_mat, scale_vec, zero_mat, zero_vec, Mat3, Vec3, I, ZERO};
use crate::C64;

/// Shape of one profile term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    /// `exp(-g x)`.
    Exp(C64),
    /// Divided difference `M(g1, g2, x)`.
    Div(C64, C64),
}

impl Rate {
    /// `n`-th derivative in `x`.
    pub fn eval(&self, x: f64, n: usize) -> C64 {
        match *self {
            Rate::Exp(g) => (-g).powu(n as u32) * (-g * x).exp(),
            Rate::Div(g1, g2) => eval_m_derivative(g1, g2, x, n),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileTerm {
    pub rate: Rate,
    pub u: Vec3,
    pub p: C64,
    pub q: Mat3,
}

/// Values of `(u, p, Q)` or one of their derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub u: Vec3,
    pub p: C64,
    pub q: Mat3,
}

impl ProfileSample {
    pub fn zero() -> Self {
        Self { u: zero_vec(), p: ZERO, q: zero_mat() }
    }
}

/// A mode profile: a short list of exponential terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeProfile {
    pub dim: usize,
    pub terms: Vec<ProfileTerm>,
}

impl ModeProfile {
    /// Value and derivatives up to `order` at `x`; entry `n` is the `n`-th derivative.
    pub fn eval(&self, x: f64, order: usize) -> Vec<ProfileSample> {
        (0..=order)
            .map(|n| {
                let mut s = ProfileSample::zero();
                for t in &self.terms {
                    let f = t.rate.eval(x, n);
                    s.u = add_vec(&s.u, &scale_vec(&t.u, f));
                    s.p += t.p * f;
                    s.q = add_mat(&s.q, &scale_mat(&t.q, f));
                }
                s
            })
            .collect()
    }

    pub fn value(&self, x: f64) -> ProfileSample {
        self.eval(x, 0)[0]
    }
}

/// Builds the profile terms of a solved mode. The regular branch uses
/// `(A1 + A2) e^{-L1 x} + (L2 - L1) A2 M(L2, L1, x)`, which stays bounded
/// as `L1 -> L2`.
pub fn eval_profile(sol: &ModeSolution) -> ModeProfile {
    let m = &sol.mode;
    let a = C64::from(m.a_abs);
    let b = m.b_a;
    let zv = zero_vec();
    let zm = zero_mat();
    let term = |rate, u, p, q| ProfileTerm { rate, u, p, q };
    let terms = match &sol.amplitudes {
        AmplitudeSet::Regular(r) => {
            let dl = m.l2 - m.l1;
            vec![
                term(Rate::Exp(a), r.a0, r.c, r.ajk),
                term(Rate::Exp(b), zv, r.d, r.p),
                term(Rate::Exp(m.l1), add_vec(&r.a1, &r.a2), ZERO, add_mat(&r.q1, &r.q2)),
                term(Rate::Div(m.l2, m.l1), scale_vec(&r.a2, dl), ZERO, scale_mat(&r.q2, dl)),
            ]
        }
        AmplitudeSet::Degenerate(r) => {
            // x e^{-L0 x} = -M(L0, L0, x)
            let minus = C64::new(-1.0, 0.0);
            vec![
                term(Rate::Exp(a), r.a0, r.c, r.ajk),
                term(Rate::Exp(b), zv, r.d, r.p),
                term(Rate::Exp(r.l0), r.a1, ZERO, r.q1),
                term(Rate::Div(r.l0, r.l0), scale_vec(&r.a2, minus), ZERO, scale_mat(&r.q2, minus)),
            ]
        }
        AmplitudeSet::Decoupled(r) => vec![
            term(Rate::Exp(a), r.a0, r.c, zm),
            term(Rate::Exp(r.l_s), r.a_s, ZERO, zm),
            term(Rate::Exp(b), zv, ZERO, r.p),
        ],
    };
    ModeProfile { dim: m.dim, terms }
}

/// Sup-norm residuals of the mode system, normalised by
/// `(1 + |lambda|) (|h| + |H|)`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub momentum: f64,
    pub divergence: f64,
    pub q_equation: f64,
    pub boundary: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.divergence).max(self.q_equation).max(self.boundary)
    }
}

/// Pointwise residuals of the momentum, divergence and `Q` equations of a
/// mode, given the profile and its first three derivatives at `x`.
pub fn pointwise_residual(params: &ModelParams, mode: &ModeContext, d: &[ProfileSample]) -> (f64, f64, f64) {
    let n = mode.dim;
    let lam = mode.lambda;
    let a2 = mode.a_abs * mode.a_abs;
    let beta = params.beta;
    let ix: Vec<C64> = mode.xi_prime.iter().map(|x| I * *x).collect();
    let (s0, s1, s2, s3) = (&d[0], &d[1], &d[2], &d[3]);
    // (Delta - a) acting on Q in the mode: (D^2 - A^2 - a)
    let lap_q = |q0: C64, q2: C64| q2 - (a2 + params.a) * q0;
    let mut mom: f64 = 0.0;
    for j in 0..n {
        let mut r = (lam + a2) * s0.u[j] - s2.u[j];
        r += if j < n - 1 { ix[j] * s0.p } else { s1.p };
        for k in 0..n - 1 {
            r += beta * ix[k] * lap_q(s0.q[j][k], s2.q[j][k]);
        }
        r += beta * lap_q(s1.q[j][n - 1], s3.q[j][n - 1]);
        mom = mom.max(r.norm());
    }
    let mut div = s1.u[n - 1];
    for k in 0..n - 1 {
        div += ix[k] * s0.u[k];
    }
    let grad = |j: usize, k: usize| if k < n - 1 { ix[k] * s0.u[j] } else { s1.u[j] };
    let mut qe: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let r = (lam + a2 + params.a) * s0.q[j][k] - s2.q[j][k] - 0.5 * beta * (grad(j, k) + grad(k, j));
            qe = qe.max(r.norm());
        }
    }
    (mom, div.norm(), qe)
}

/// Residual of the mode system over `x_grid` and of the boundary conditions.
pub fn mode_residual(
    params: &ModelParams,
    mode: &ModeContext,
    data: &BoundaryModeData,
    profile: &ModeProfile,
    x_grid: &[f64],
) -> ResidualReport {
    let n = mode.dim;
    let scale = (1.0 + mode.lambda.norm()) * data.norm(n);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut rep = ResidualReport::default();
    for &x in x_grid {
        let d = profile.eval(x, 3);
        let (m, dv, q) = pointwise_residual(params, mode, &d);
        rep.momentum = rep.momentum.max(m / scale);
        rep.divergence = rep.divergence.max(dv / scale);
        rep.q_equation = rep.q_equation.max(q / scale);
    }
    let d0 = profile.eval(0.0, 1);
    let mut bc: f64 = 0.0;
    for j in 0..n {
        bc = bc.max((d0[0].u[j] - data.h[j]).norm());
        for k in 0..n {
            bc = bc.max((d0[1].q[j][k] - data.hq[j][k]).norm());
        }
    }
    rep.boundary = bc / scale;
    rep
}

/// Uniform grid of `n` points on `[0, x_max]`.
pub fn uniform_grid(x_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| x_max * i as f64 / (n - 1) as f64).collect()
}
