//! Amplitudes of the exponential mode profile from boundary data.
//!
//! For a tangential frequency `xi'` the solution of the mode ODE system is a
//! sum of exponentials with rates `A = |xi'|`, `B_a`, `L1` and `L2`. The
//! relations between their amplitudes are mutually recursive, so they are
//! stacked into one square linear system and solved with partial pivoting.
//! Three variants exist: the regular coupled system, the confluent system at
//! `lambda = eta` where `L1 = L2`, and the decoupled system for `beta = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RowSystem;
use crate::params::ModelParams;
use crate::scalars::{eval_cal_a, hbar_coeff, tangential_divergence};
use crate::symbols::{eta_point, ModeContext};
use crate::tensor::{kappa, mat_norm, vec_norm, zero_mat, zero_vec, Mat3, Vec3, I, ONE, ZERO};
use crate::C64;

/// Boundary data of one mode: velocity trace `h` and Neumann data `hq` of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryModeData {
    pub h: Vec3,
    pub hq: Mat3,
}

impl BoundaryModeData {
    pub fn zero() -> Self {
        Self { h: zero_vec(), hq: zero_mat() }
    }

    pub fn norm(&self, dim: usize) -> f64 {
        vec_norm(&self.h, dim) + mat_norm(&self.hq, dim)
    }

    /// Checks `h_N = 0` and that `hq` is symmetric and traceless.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let scale = 1.0 + self.norm(dim);
        if self.h[dim - 1].norm() > 1e-12 * scale {
            return Err(Error::InvalidInput("normal component of the velocity trace must vanish".into()));
        }
        if crate::tensor::asymmetry(&self.hq, dim) > 1e-12 * scale {
            return Err(Error::InvalidInput("Neumann data of Q must be symmetric".into()));
        }
        if crate::tensor::trace(&self.hq, dim).norm() > 1e-12 * scale {
            return Err(Error::InvalidInput("Neumann data of Q must be traceless".into()));
        }
        Ok(())
    }
}

/// Amplitudes of the regular branch. The velocity is
/// `A0 e^{-Ax} + A1 e^{-L1 x} + A2 e^{-L2 x}` and `E` is the auxiliary
/// combination that packages the tangential parts of `A1`, `A2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularAmplitudes {
    pub c: C64,
    pub d: C64,
    pub a0: Vec3,
    pub a1: Vec3,
    pub a2: Vec3,
    pub ajk: Mat3,
    pub p: Mat3,
    pub q1: Mat3,
    pub q2: Mat3,
    pub e: Vec3,
}

/// Amplitudes of the confluent branch, where the velocity is
/// `A0 e^{-Ax} + (A1 + A2 x) e^{-L0 x}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegenerateAmplitudes {
    pub l0: C64,
    pub c: C64,
    pub d: C64,
    pub a0: Vec3,
    pub a1: Vec3,
    pub a2: Vec3,
    pub ajk: Mat3,
    pub p: Mat3,
    pub q1: Mat3,
    pub q2: Mat3,
}

/// Amplitudes for `beta = 0`: a Stokes profile `A0 e^{-Ax} + AS e^{-L_S x}`
/// with `L_S = sqrt(lambda + A^2)` and a heat profile `P e^{-B x}` for `Q`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecoupledAmplitudes {
    pub l_s: C64,
    pub c: C64,
    pub a0: Vec3,
    pub a_s: Vec3,
    pub p: Mat3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AmplitudeSet {
    Regular(RegularAmplitudes),
    Degenerate(DegenerateAmplitudes),
    Decoupled(DecoupledAmplitudes),
}

/// A solved mode: its spectral context and amplitudes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSolution {
    pub mode: ModeContext,
    pub amplitudes: AmplitudeSet,
}

fn read_vec(x: &[C64], off: usize, dim: usize) -> Vec3 {
    let mut v = zero_vec();
    v[..dim].copy_from_slice(&x[off..off + dim]);
    v
}

fn read_mat(x: &[C64], off: usize, dim: usize) -> Mat3 {
    let mut m = zero_mat();
    for j in 0..dim {
        for k in 0..dim {
            m[j][k] = x[off + j * dim + k];
        }
    }
    m
}

/// Unknown offsets of the regular system.
struct RegularLayout {
    c: usize,
    d: usize,
    a0: usize,
    a1: usize,
    a2: usize,
    ajk: usize,
    p: usize,
    q1: usize,
    q2: usize,
    e: usize,
}

fn build_regular(params: &ModelParams, mode: &ModeContext, data: &BoundaryModeData) -> (RowSystem, RegularLayout) {
    let n = mode.dim;
    let nn = n * n;
    let lam = mode.lambda;
    let beta = params.beta;
    let a = C64::from(mode.a_abs);
    let (b, l1, l2) = (mode.b_a, mode.l1, mode.l2);
    let xi = &mode.xi_prime;
    let (ka, kb) = (kappa(xi, a, n), kappa(xi, b, n));
    let (k1, k2) = (kappa(xi, l1, n), kappa(xi, l2, n));
    let w2 = lam + params.a;
    let (d1, d2) = (w2 - mode.z1, w2 - mode.z2);

    let mut s = RowSystem::new();
    let lay = RegularLayout {
        c: s.block(1),
        d: s.block(1),
        a0: s.block(n),
        a1: s.block(n),
        a2: s.block(n),
        ajk: s.block(nn),
        p: s.block(nn),
        q1: s.block(nn),
        q2: s.block(nn),
        e: s.block(n - 1),
    };
    for j in 0..n {
        s.row("A0", &[(lay.a0 + j, ONE), (lay.c, ka[j] / lam)], ZERO);
    }
    for j in 0..n {
        for k in 0..n {
            s.row("Ajk", &[(lay.ajk + j * n + k, ONE), (lay.c, beta * ka[j] * ka[k] / (lam * w2))], ZERO);
        }
    }
    for (q, amp, kk, d) in [(lay.q1, lay.a1, &k1, d1), (lay.q2, lay.a2, &k2, d2)] {
        for j in 0..n {
            for k in 0..n {
                s.row("Q", &[(q + j * n + k, d), (amp + k, -0.5 * beta * kk[j]), (amp + j, -0.5 * beta * kk[k])], ZERO);
            }
        }
    }
    for j in 0..n {
        for k in 0..n {
            let m = j * n + k;
            s.row("P", &[(lay.p + m, b), (lay.ajk + m, a), (lay.q1 + m, l1), (lay.q2 + m, l2)], -data.hq[j][k]);
        }
    }
    let div1: Vec<_> = (0..n).map(|k| (lay.a1 + k, k1[k])).collect();
    s.row("div", &div1, ZERO);
    let div2: Vec<_> = (0..n).map(|k| (lay.a2 + k, k2[k])).collect();
    s.row("div", &div2, ZERO);
    let bc_start = s.nrows();
    for j in 0..n {
        s.row("trace", &[(lay.a0 + j, ONE), (lay.a1 + j, ONE), (lay.a2 + j, ONE)], data.h[j]);
    }
    for j in 0..n {
        let mut r = vec![(lay.d, kb[j])];
        r.extend((0..n).map(|k| (lay.p + j * n + k, beta * lam * kb[k])));
        s.row("D", &r, ZERO);
    }
    let cal_a = eval_cal_a(mode);
    for j in 0..n - 1 {
        let g = l1 * (b * l1 - a * a);
        s.row("E", &[(lay.e + j, d1), (lay.a2 + j, -(l2 - l1) * cal_a / d2), (lay.a0 + j, g)], g * data.h[j]);
    }
    if mode.a_abs == 0.0 {
        // at xi' = 0 the pressure mode is constant and only fixed up to a gauge;
        // the normal trace row is then implied by the divergence rows
        s.replace_row(bc_start + n - 1, "gauge", &[(lay.c, ONE)], ZERO);
    }
    (s, lay)
}

/// Solves the regular coupled system. Fails with `DegenerateLambda` inside the
/// degeneracy band and `BetaZero` when the coupling vanishes.
pub fn assemble_amplitudes(
    params: &ModelParams,
    mode: &ModeContext,
    data: &BoundaryModeData,
) -> Result<RegularAmplitudes> {
    if params.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    if mode.degenerate {
        return Err(Error::DegenerateLambda { lambda: format!("{}", mode.lambda), eta: mode.eta.unwrap_or(f64::NAN) });
    }
    let (s, lay) = build_regular(params, mode, data);
    let x = s.solve()?;
    let n = mode.dim;
    Ok(RegularAmplitudes {
        c: x[lay.c],
        d: x[lay.d],
        a0: read_vec(&x, lay.a0, n),
        a1: read_vec(&x, lay.a1, n),
        a2: read_vec(&x, lay.a2, n),
        ajk: read_mat(&x, lay.ajk, n),
        p: read_mat(&x, lay.p, n),
        q1: read_mat(&x, lay.q1, n),
        q2: read_mat(&x, lay.q2, n),
        e: read_vec(&x, lay.e, n - 1),
    })
}

/// Mode context evaluated exactly at the degeneracy point.
pub fn degenerate_mode(params: &ModelParams, xi_prime: &[f64]) -> Result<ModeContext> {
    let eta = eta_point(params)?;
    ModeContext::new(params, C64::new(eta, 0.0), xi_prime)
}

/// Double root at the degeneracy point, `(2 eta + a c) / (2 c)`.
pub fn degenerate_root(params: &ModelParams) -> Result<f64> {
    let eta = eta_point(params)?;
    let c = params.c_beta();
    Ok((2.0 * eta + params.a * c) / (2.0 * c))
}

/// Solves the confluent system at `lambda = eta`.
pub fn assemble_amplitudes_degenerate(
    params: &ModelParams,
    xi_prime: &[f64],
    data: &BoundaryModeData,
) -> Result<(ModeContext, DegenerateAmplitudes)> {
    if params.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let mode = degenerate_mode(params, xi_prime)?;
    let n = mode.dim;
    let nn = n * n;
    let lam = mode.lambda;
    let beta = params.beta;
    let a = C64::from(mode.a_abs);
    let b = mode.b_a;
    let z0 = degenerate_root(params)?;
    let l0 = (C64::from(z0 + mode.a_abs * mode.a_abs)).sqrt();
    let xi = &mode.xi_prime;
    let (ka, kb, k0) = (kappa(xi, a, n), kappa(xi, b, n), kappa(xi, l0, n));
    let w2 = lam + params.a;
    let d0 = w2 - z0;
    let mut en = zero_vec();
    en[n - 1] = ONE;

    let mut s = RowSystem::new();
    let (c, d) = (s.block(1), s.block(1));
    let (a0, a1, a2) = (s.block(n), s.block(n), s.block(n));
    let (ajk, p, q1, q2) = (s.block(nn), s.block(nn), s.block(nn), s.block(nn));
    for j in 0..n {
        s.row("A0", &[(a0 + j, ONE), (c, ka[j] / lam)], ZERO);
    }
    for j in 0..n {
        for k in 0..n {
            s.row("Ajk", &[(ajk + j * n + k, ONE), (c, beta * ka[j] * ka[k] / (lam * w2))], ZERO);
        }
    }
    for j in 0..n {
        for k in 0..n {
            s.row("Q2", &[(q2 + j * n + k, d0), (a2 + k, -0.5 * beta * k0[j]), (a2 + j, -0.5 * beta * k0[k])], ZERO);
        }
    }
    for j in 0..n {
        for k in 0..n {
            let m = j * n + k;
            s.row(
                "Q1",
                &[
                    (q1 + m, d0),
                    (q2 + m, 2.0 * l0),
                    (a1 + k, -0.5 * beta * k0[j]),
                    (a1 + j, -0.5 * beta * k0[k]),
                    (a2 + k, -0.5 * beta * en[j]),
                    (a2 + j, -0.5 * beta * en[k]),
                ],
                ZERO,
            );
        }
    }
    for j in 0..n {
        for k in 0..n {
            let m = j * n + k;
            s.row("P", &[(p + m, b), (ajk + m, a), (q1 + m, l0), (q2 + m, -ONE)], -data.hq[j][k]);
        }
    }
    let r: Vec<_> = (0..n).map(|k| (a2 + k, k0[k])).collect();
    s.row("div", &r, ZERO);
    let mut r: Vec<_> = (0..n).map(|k| (a1 + k, k0[k])).collect();
    r.push((a2 + n - 1, ONE));
    s.row("div", &r, ZERO);
    let bc_start = s.nrows();
    for j in 0..n {
        s.row("trace", &[(a0 + j, ONE), (a1 + j, ONE)], data.h[j]);
    }
    for j in 0..n {
        let mut r = vec![(d, kb[j])];
        r.extend((0..n).map(|k| (p + j * n + k, beta * lam * kb[k])));
        s.row("D", &r, ZERO);
    }
    if mode.a_abs == 0.0 {
        s.replace_row(bc_start + n - 1, "gauge", &[(c, ONE)], ZERO);
    }
    let x = s.solve()?;
    let amps = DegenerateAmplitudes {
        l0,
        c: x[c],
        d: x[d],
        a0: read_vec(&x, a0, n),
        a1: read_vec(&x, a1, n),
        a2: read_vec(&x, a2, n),
        ajk: read_mat(&x, ajk, n),
        p: read_mat(&x, p, n),
        q1: read_mat(&x, q1, n),
        q2: read_mat(&x, q2, n),
    };
    Ok((mode, amps))
}

/// Solves the decoupled Stokes and heat problems for `beta = 0`.
pub fn assemble_decoupled(
    params: &ModelParams,
    mode: &ModeContext,
    data: &BoundaryModeData,
) -> Result<DecoupledAmplitudes> {
    if params.beta != 0.0 {
        return Err(Error::InvalidInput("decoupled path requires beta = 0".into()));
    }
    let n = mode.dim;
    let lam = mode.lambda;
    let a = C64::from(mode.a_abs);
    let l_s = (lam + mode.a_abs * mode.a_abs).sqrt();
    if !(l_s.re > 0.0) {
        return Err(Error::BranchViolation { what: "L_S", lambda: format!("{lam}") });
    }
    let xi = &mode.xi_prime;
    let (ka, ks) = (kappa(xi, a, n), kappa(xi, l_s, n));
    let mut s = RowSystem::new();
    let (c, a0, a_s) = (s.block(1), s.block(n), s.block(n));
    for j in 0..n {
        s.row("A0", &[(a0 + j, ONE), (c, ka[j] / lam)], ZERO);
    }
    let r: Vec<_> = (0..n).map(|k| (a_s + k, ks[k])).collect();
    s.row("div", &r, ZERO);
    let bc_start = s.nrows();
    for j in 0..n {
        s.row("trace", &[(a0 + j, ONE), (a_s + j, ONE)], data.h[j]);
    }
    if mode.a_abs == 0.0 {
        s.replace_row(bc_start + n - 1, "gauge", &[(c, ONE)], ZERO);
    }
    let x = s.solve()?;
    let mut p = zero_mat();
    for j in 0..n {
        for k in 0..n {
            p[j][k] = -data.hq[j][k] / mode.b_a;
        }
    }
    Ok(DecoupledAmplitudes { l_s, c: x[c], a0: read_vec(&x, a0, n), a_s: read_vec(&x, a_s, n), p })
}

/// Solves one mode on whichever branch applies. Inside the degeneracy band
/// the confluent solution at `eta` is returned.
pub fn solve_mode(
    params: &ModelParams,
    lambda: C64,
    xi_prime: &[f64],
    data: &BoundaryModeData,
) -> Result<ModeSolution> {
    let mode = ModeContext::new(params, lambda, xi_prime)?;
    if params.beta == 0.0 {
        let amps = assemble_decoupled(params, &mode, data)?;
        return Ok(ModeSolution { mode, amplitudes: AmplitudeSet::Decoupled(amps) });
    }
    if mode.degenerate {
        let (mode, amps) = assemble_amplitudes_degenerate(params, xi_prime, data)?;
        return Ok(ModeSolution { mode, amplitudes: AmplitudeSet::Degenerate(amps) });
    }
    let amps = assemble_amplitudes(params, &mode, data)?;
    Ok(ModeSolution { mode, amplitudes: AmplitudeSet::Regular(amps) })
}

/// Residual of each amplitude relation after a regular solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationReport {
    pub relations: Vec<(String, f64)>,
    pub max: f64,
}

fn rel_diff(x: C64, y: C64) -> f64 {
    let m = x.norm().max(y.norm());
    if m == 0.0 {
        0.0
    } else {
        (x - y).norm() / m
    }
}

/// Back-substitutes a regular solution into every stacked relation and into
/// the closed forms for `C`, `D`, `A1_N`, `A2_N`, the tangential `A1` and `E`.
pub fn relation_residuals(
    params: &ModelParams,
    mode: &ModeContext,
    data: &BoundaryModeData,
    amps: &RegularAmplitudes,
) -> Result<RelationReport> {
    let n = mode.dim;
    let (s, lay) = build_regular(params, mode, data);
    let mut x = vec![ZERO; s.ncols()];
    x[lay.c] = amps.c;
    x[lay.d] = amps.d;
    for j in 0..n {
        x[lay.a0 + j] = amps.a0[j];
        x[lay.a1 + j] = amps.a1[j];
        x[lay.a2 + j] = amps.a2[j];
        if j < n - 1 {
            x[lay.e + j] = amps.e[j];
        }
        for k in 0..n {
            x[lay.ajk + j * n + k] = amps.ajk[j][k];
            x[lay.p + j * n + k] = amps.p[j][k];
            x[lay.q1 + j * n + k] = amps.q1[j][k];
            x[lay.q2 + j * n + k] = amps.q2[j][k];
        }
    }
    let mut relations: Vec<(String, f64)> =
        s.residuals_by_label(&x).into_iter().map(|(l, v)| (l.to_string(), v)).collect();

    let lam = mode.lambda;
    let beta = params.beta;
    let a = C64::from(mode.a_abs);
    let (b, l1, l2) = (mode.b_a, mode.l1, mode.l2);
    let xi = &mode.xi_prime;
    let hdot = tangential_divergence(xi, &data.h);
    let w2 = lam + params.a;
    let (d1, d2) = (w2 - mode.z1, w2 - mode.z2);

    // D from the normal row of the pressure relation
    let mut dd = -b * amps.p[n - 1][n - 1];
    for k in 0..n - 1 {
        dd += I * xi[k] * amps.p[n - 1][k];
    }
    relations.push(("D closed form".into(), rel_diff(beta * lam / b * dd, amps.d)));

    if mode.a_abs > 0.0 {
        let a1n = -(a / lam) * (l2 - a) / (l2 - l1) * amps.c - hdot / (l2 - l1);
        let a2n = (a / lam) * (l1 - a) / (l2 - l1) * amps.c + hdot / (l2 - l1);
        relations.push(("A1_N closed form".into(), rel_diff(a1n, amps.a1[n - 1])));
        relations.push(("A2_N closed form".into(), rel_diff(a2n, amps.a2[n - 1])));

        let c_closed = crate::scalars::pressure_amplitude_closed_form(params, mode, &data.h, &data.hq)?;
        relations.push(("C closed form".into(), rel_diff(c_closed, amps.c)));

        let cal_a = eval_cal_a(mode);
        let mut worst_a1: f64 = 0.0;
        let mut worst_e: f64 = 0.0;
        for j in 0..n - 1 {
            let rhs = -(d2 * amps.e[j] - l2 * (b * l2 - a * a) * (data.h[j] - amps.a0[j])) * d1;
            worst_a1 = worst_a1.max(rel_diff(rhs, (l2 - l1) * cal_a * amps.a1[j]));
            let mut e = 2.0 * I * xi[j] * b / (beta * beta * lam) * amps.d;
            let mut t = -b * amps.ajk[j][n - 1];
            let mut th = -b * data.hq[j][n - 1];
            for k in 0..n - 1 {
                t += I * xi[k] * amps.ajk[j][k];
                th += I * xi[k] * data.hq[j][k];
            }
            e += -2.0 * a / beta * t;
            e += I * xi[j] * (l1 * amps.a1[n - 1] / (b + l1) + l2 * amps.a2[n - 1] / (b + l2));
            e += -2.0 / beta * th;
            worst_e = worst_e.max(rel_diff(e, amps.e[j]));
        }
        relations.push(("A1 tangential".into(), worst_a1));
        relations.push(("E closed form".into(), worst_e));
    }
    let max = relations.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(RelationReport { relations, max })
}

/// Per-piece decomposition of `E_k` as a linear functional of the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EDecomposition {
    /// Coefficient of `i xi'.h'` in `E_k`.
    pub e_h: Vec<C64>,
    /// Coefficient of `H_NN`.
    pub e_hnn: Vec<C64>,
    /// `[k][j]`: coefficient of `H_jN` (counted once per symmetric pair).
    pub e_hjn: Vec<Vec<C64>>,
    /// `[k][j][l]`: coefficient of `H_jl`, tangential `j, l`.
    pub e_hjl: Vec<Vec<Vec<C64>>>,
    /// Scalar multiplier of the `h` part.
    pub script_e_h: C64,
    /// Scalar multiplier shared by all `H` parts.
    pub script_b: C64,
}

impl EDecomposition {
    pub fn apply(&self, data: &BoundaryModeData, xi: &[f64]) -> Vec<C64> {
        let n = xi.len();
        let hdot = tangential_divergence(xi, &data.h);
        (0..n)
            .map(|k| {
                let mut e = self.e_h[k] * hdot + self.e_hnn[k] * data.hq[n][n];
                for j in 0..n {
                    e += self.e_hjn[k][j] * data.hq[j][n];
                    for l in 0..n {
                        e += self.e_hjl[k][j][l] * data.hq[j][l];
                    }
                }
                e
            })
            .collect()
    }
}

/// Multiplier shared by the `H` parts of `E_k` (and, scaled by the `h`
/// coefficient, by its `h` part):
/// `2AB/(B+A)^2 - 2N / ((B+L1)(B+L2)(lambda+a)) - (AB + L1 L2) / ((B+L1)(B+L2))`
/// with `N = (L2 B^2 - A^2 B)(L1 - A) + A L1 (L2 + B)(A - B)`. Symmetric in
/// the two roots. Differences are formed without cancellation:
/// `L1 - A = z1 / (L1 + A)`, `A - B = -(lambda + a) / (A + B)` and
/// `L2 B - A^2 = (z2 w + A^2 (z2 + w)) / (L2 B + A^2)`, `w = lambda + a`.
pub fn shared_h_multiplier(mode: &ModeContext) -> C64 {
    let a = C64::from(mode.a_abs);
    let (b, l1, l2) = (mode.b_a, mode.l1, mode.l2);
    let a2 = a * a;
    let w = mode.lambda + mode.a;
    let l1_minus_a = mode.z1 / (l1 + a);
    let l2b_minus_a2 = (mode.z2 * w + a2 * (mode.z2 + w)) / (l2 * b + a2);
    let (bl1, bl2) = (b + l1, b + l2);
    // N / w with the (A - B) factor divided through
    let n_over_w = b * l2b_minus_a2 * l1_minus_a / w - a * l1 * bl2 / (a + b);
    2.0 * a * b / ((b + a) * (b + a)) - 2.0 * n_over_w / (bl1 * bl2) - (a * b + l1 * l2) / (bl1 * bl2)
}

/// Decomposes `E_k` into data pieces; every coefficient is explicit.
pub fn eval_e_decomposition(params: &ModelParams, mode: &ModeContext) -> Result<EDecomposition> {
    if mode.a_abs == 0.0 {
        return Err(Error::InvalidInput("decomposition needs xi' != 0".into()));
    }
    let n = mode.dim - 1;
    let beta = params.beta;
    let lam = mode.lambda;
    let a = C64::from(mode.a_abs);
    let (b, l1, l2) = (mode.b_a, mode.l1, mode.l2);
    let a2 = a * a;
    let w2 = lam + params.a;
    let cal_c = crate::scalars::eval_cal_c(params, mode)?;
    let lc = lam * cal_c;
    let ix: Vec<C64> = mode.xi_prime.iter().map(|x| I * *x).collect();
    let bb = b * b;
    let script_b = shared_h_multiplier(mode);

    let script_e_h = hbar_coeff(params, mode);
    let (bl1, bl2) = (b + l1, b + l2);
    let bracket =
        script_e_h / lc * script_b - 2.0 * (bb * (l1 + l2) - a2 * b + l1 * l2 * b) / (w2 * bl1 * bl2) + b / (bl1 * bl2);
    let e_h: Vec<C64> = ix.iter().map(|&x| x * bracket).collect();
    let e_hnn: Vec<C64> = ix.iter().map(|&x| x * script_b / lc * a2 + 2.0 * x * bb / (beta * w2)).collect();
    let e_hjn = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| {
                    let delta = if j == k { 2.0 * b / beta } else { ZERO };
                    -(bb + a2) * ix[k] * ix[j] * script_b / (b * lc) - 4.0 * ix[j] * ix[k] * b / (beta * w2) + delta
                })
                .collect()
        })
        .collect();
    let e_hjl = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|l| {
                            let t = ix[j] * ix[k] * ix[l];
                            let delta = if j == k { -2.0 / beta * ix[l] } else { ZERO };
                            t * script_b / lc + 2.0 * t / (beta * w2) + delta
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(EDecomposition { e_h, e_hnn, e_hjn, e_hjl, script_e_h, script_b })
}
