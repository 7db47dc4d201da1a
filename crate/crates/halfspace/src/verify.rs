//! Grid-based certification of the scalar estimates behind the resolvent
//! bounds: non-vanishing of the normalised denominators, their Laurent
//! tails, multiplier-class derivative bounds, root bounds, continuity at
//! the double root, agreement with the finite-difference oracle and an
//! empirical resolvent-estimate constant.
//!
//! Uniform scalar bounds are the verifiable surrogate of the randomized
//! operator bounds; those are not tested here.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_amplitudes, assemble_amplitudes_degenerate, shared_h_multiplier, solve_mode, BoundaryModeData,
};
use crate::error::{Error, Result};
use crate::field::fd_weights;
use crate::oracle::{OracleProfile, StretchedGrid, TruncatedBvp};
use crate::params::ModelParams;
use crate::profile::{eval_profile, ModeProfile, ProfileSample};
use crate::scalars::{eval_cal_a, eval_cal_c_degenerate, f_a, f_a_limit, g_a, hbar_coeff, normalized_variables};
use crate::symbols::{characteristic_roots, eta_point, normalized_roots, ModeContext};
use crate::tensor::{zero_mat, Mat3, Vec3};
use crate::C64;

const PI: f64 = std::f64::consts::PI;

/// Deterministic sample grid over the sector and the tangential variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanGrid {
    pub level: u32,
    pub lambda_samples: Vec<C64>,
    /// `|xi'|` samples.
    pub xi_samples: Vec<f64>,
    /// `|t|` samples of `t = |xi'| / sqrt(lambda + a)` for the scalar scans.
    pub t_samples: Vec<f64>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl ScanGrid {
    /// Log-radial by angular grid over the closed sector
    /// `|arg lambda| <= pi - theta`, `r <= |lambda| <= lambda_max`, with
    /// `6 * 2^level` radii, `4 * 2^level + 1` angles and `6 * 2^level`
    /// samples of `|xi'|` in `[xi_min, xi_max]` and of `|t|` in
    /// `[1e-3, 1e3]` (plus `t = 0`).
    pub fn new(params: &ModelParams, level: u32, lambda_max: f64, xi_min: f64, xi_max: f64) -> Self {
        let s = 1usize << level;
        let opening = PI - params.theta;
        let radii = log_space(params.r, lambda_max, 6 * s);
        let n_ang = 4 * s + 1;
        let angles: Vec<f64> = (0..n_ang).map(|i| -opening + 2.0 * opening * i as f64 / (n_ang - 1) as f64).collect();
        let lambda_samples = radii.iter().flat_map(|r| angles.iter().map(move |a| C64::from_polar(*r, *a))).collect();
        let mut t_samples = vec![0.0];
        t_samples.extend(log_space(1e-3, 1e3, 6 * s));
        Self { level, lambda_samples, xi_samples: log_space(xi_min, xi_max, 6 * s), t_samples }
    }

    /// Default grid: `lambda_max = 1e6`, `|xi'|` in `[1e-2, 1e3]`.
    pub fn standard(params: &ModelParams, level: u32) -> Self {
        Self::new(params, level, 1e6, 1e-2, 1e3)
    }
}

/// `t = s / sqrt(lambda + a)` scaled so that `|t| = s`, i.e. the value of
/// `t` produced by a real `|xi'|`.
pub fn t_on_ray(params: &ModelParams, lambda: C64, s: f64) -> C64 {
    let w = (lambda + params.a).sqrt();
    C64::from_polar(s, -w.arg())
}

/// Points approaching the double root along the real axis, plus the point itself.
fn eta_ray(params: &ModelParams) -> Vec<C64> {
    let Ok(eta) = eta_point(params) else { return Vec::new() };
    let mut v = vec![C64::new(eta, 0.0)];
    for k in 1..=6 {
        let e = 10f64.powi(-k);
        v.push(C64::new(eta * (1.0 + e), 0.0));
        v.push(C64::new(eta * (1.0 - e), 0.0));
        v.push(C64::new(eta, eta * e));
    }
    v.retain(|l| l.norm() >= params.r);
    v
}

/// Smallest values found by the non-vanishing scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonvanishingReport {
    pub level: u32,
    pub points: usize,
    pub min_f: f64,
    pub argmin_f: (C64, f64),
    /// `min |G_a| / (1 + |t|^2)`.
    pub min_g: f64,
    pub argmin_g: (C64, f64),
    /// `min |C~_a|` over the `|xi'|` samples at the double root, if it exists.
    pub min_tilde_c: Option<f64>,
    pub floor: f64,
}

/// Scans `|F_a(lambda, t)|` and `|G_a(lambda, t)| / (1 + |t|^2)` over the
/// grid and the ray through the double root, and `|C~_a|` at the double
/// root. Fails with `FloorViolated` at the first minimum below `floor`.
pub fn scan_nonvanishing(params: &ModelParams, grid: &ScanGrid, floor: f64) -> Result<NonvanishingReport> {
    if params.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let mut lambdas = grid.lambda_samples.clone();
    lambdas.extend(eta_ray(params));
    // per lambda: (min |F|, where), (min |G| / (1 + t^2), where)
    let cells: Vec<_> = lambdas
        .par_iter()
        .map(|&l| {
            let mut best = (f64::INFINITY, (l, 0.0), f64::INFINITY, (l, 0.0));
            for &s in &grid.t_samples {
                let t = t_on_ray(params, l, s);
                let f = f_a(params, l, t).norm();
                let g = g_a(params, l, t).norm() / (1.0 + s * s);
                if !(f >= best.0) {
                    best.0 = f;
                    best.1 = (l, s);
                }
                if !(g >= best.2) {
                    best.2 = g;
                    best.3 = (l, s);
                }
            }
            best
        })
        .collect();
    let mut min_f = (f64::INFINITY, (C64::new(0.0, 0.0), 0.0));
    let mut min_g = min_f;
    for c in &cells {
        if !(c.0 >= min_f.0) {
            min_f = (c.0, c.1);
        }
        if !(c.2 >= min_g.0) {
            min_g = (c.2, c.3);
        }
    }
    let min_tilde_c = if eta_point(params).is_ok() {
        let mut m = f64::INFINITY;
        for &x in &grid.xi_samples {
            let xi = direction(params.dim, x);
            m = m.min(eval_cal_c_degenerate(params, &xi)?.norm());
        }
        Some(m)
    } else {
        None
    };
    let loc = |p: (C64, f64)| format!("lambda = {}, |t| = {}", p.0, p.1);
    if !(min_f.0 > floor) {
        return Err(Error::FloorViolated { value: min_f.0, floor, location: loc(min_f.1) });
    }
    if !(min_g.0 > floor) {
        return Err(Error::FloorViolated { value: min_g.0, floor, location: loc(min_g.1) });
    }
    if let Some(m) = min_tilde_c {
        if !(m > floor) {
            return Err(Error::FloorViolated { value: m, floor, location: "double root".into() });
        }
    }
    Ok(NonvanishingReport {
        level: grid.level,
        points: lambdas.len() * grid.t_samples.len(),
        min_f: min_f.0,
        argmin_f: min_f.1,
        min_g: min_g.0,
        argmin_g: min_g.1,
        min_tilde_c,
        floor,
    })
}

/// Tangential frequency of magnitude `x` along a fixed direction.
fn direction(dim: usize, x: f64) -> Vec<f64> {
    match dim {
        2 => vec![x],
        _ => vec![x * 0.8, x * 0.6],
    }
}

/// One row of the Laurent-tail table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    /// `sup_lambda |F_a(lambda, t) - F_a(lambda, infinity)|`.
    pub f_deviation: f64,
    /// `sup_lambda |G_a(lambda, t) / (2 t^2) - 1|`.
    pub g_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Least-squares slope of `log f_deviation` against `log t`.
    pub decay_exponent: f64,
}

/// Deviation of `F_a` and `G_a` from their large-`|t|` limits over the
/// `lambda` samples of `grid`, for increasing `|t|` spanning at least three
/// decades.
pub fn laurent_tail_check(params: &ModelParams, grid: &ScanGrid, t_values: &[f64]) -> Result<TailReport> {
    if params.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let increasing = t_values.windows(2).all(|w| w[1] > w[0]);
    if !increasing || t_values.len() < 2 || t_values[t_values.len() - 1] < 1e3 * t_values[0] {
        return Err(Error::InvalidInput("t values must increase and span at least three decades".into()));
    }
    let rows: Vec<TailRow> = t_values
        .iter()
        .map(|&s| {
            let (fd, gd) = grid
                .lambda_samples
                .par_iter()
                .map(|&l| {
                    let t = t_on_ray(params, l, s);
                    let nr = normalized_roots(params, l);
                    let fd = (f_a(params, l, t) - f_a_limit(nr.z1_tilde, nr.z2_tilde)).norm();
                    let gd = (g_a(params, l, t) / (2.0 * t * t) - 1.0).norm();
                    (fd, gd)
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
            TailRow { t: s, f_deviation: fd, g_deviation: gd }
        })
        .collect();
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.f_deviation > 0.0).map(|r| (r.t.ln(), r.f_deviation.ln())).collect();
    Ok(TailReport { decay_exponent: slope(&pts), rows })
}

/// Least-squares slope of `y` against `x`.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    num / den
}

/// Mode context at `(lambda, xi)` whose roots are labelled to match
/// `reference` (the labels swap where the two roots cross).
fn tracked_mode(params: &ModelParams, lambda: C64, xi: &[f64], reference: Option<(C64, C64)>) -> Result<ModeContext> {
    let mut m = ModeContext::new(params, lambda, xi)?;
    if let Some((r1, r2)) = reference {
        if (m.z1 - r2).norm() + (m.z2 - r1).norm() < (m.z1 - r1).norm() + (m.z2 - r2).norm() {
            std::mem::swap(&mut m.z1, &mut m.z2);
            std::mem::swap(&mut m.l1, &mut m.l2);
        }
    }
    m.degenerate = false;
    Ok(m)
}

type SymbolFn = Box<dyn Fn(&ModelParams, &ModeContext) -> Result<C64> + Send + Sync>;

/// What a registered symbol claims: order `s` and type 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCheckSpec {
    pub symbol_id: String,
    pub order: f64,
    pub kind: u8,
    pub max_alpha: usize,
}

pub struct RegisteredSymbol {
    pub spec: MultiplierCheckSpec,
    /// The symbol depends on the labelling of the two roots or on the
    /// regular-branch solve, neither of which is differentiable where the
    /// roots coincide; a neighbourhood of the double root is skipped.
    pub per_root: bool,
    eval: SymbolFn,
}

impl RegisteredSymbol {
    pub fn eval(&self, params: &ModelParams, mode: &ModeContext) -> Result<C64> {
        (self.eval)(params, mode)
    }

    /// The same symbol checked against a different order.
    pub fn with_order(mut self, order: f64) -> Self {
        self.spec.order = order;
        self
    }
}

fn sym(id: &str, order: f64, kind: u8, per_root: bool, f: SymbolFn) -> RegisteredSymbol {
    RegisteredSymbol {
        spec: MultiplierCheckSpec { symbol_id: id.into(), order, kind, max_alpha: 2 },
        per_root,
        eval: f,
    }
}

fn root(m: &ModeContext, j: usize) -> C64 {
    if j == 1 {
        m.l1
    } else {
        m.l2
    }
}

fn zroot(m: &ModeContext, j: usize) -> C64 {
    if j == 1 {
        m.z1
    } else {
        m.z2
    }
}

// Differences of the decay rates in cancellation-free form; the naive
// differences lose all digits once |xi'| is large against |lambda|.
fn l_minus_a(m: &ModeContext, j: usize) -> C64 {
    zroot(m, j) / (root(m, j) + m.a_abs)
}

fn b_minus_l(m: &ModeContext, j: usize) -> C64 {
    (m.lambda + m.a - zroot(m, j)) / (m.b_a + root(m, j))
}

fn b_minus_a(m: &ModeContext) -> C64 {
    (m.lambda + m.a) / (m.b_a + m.a_abs)
}

/// Symbols with their claimed classes. `(L1 - L2)^{-1}` is left out: it is
/// unbounded at the double root.
pub fn symbol_registry() -> Vec<RegisteredSymbol> {
    let a = |m: &ModeContext| C64::from(m.a_abs);
    let w2 = |m: &ModeContext| m.lambda + m.a;
    let mut v = vec![
        sym("B^1", 1.0, 1, false, Box::new(|_, m| Ok(m.b_a))),
        sym("B^-1", -1.0, 1, false, Box::new(|_, m| Ok(m.b_a.inv()))),
        sym("B^-2", -2.0, 1, false, Box::new(|_, m| Ok((m.b_a * m.b_a).inv()))),
        sym("A^1", 1.0, 2, false, Box::new(move |_, m| Ok(a(m)))),
        sym("A^2", 2.0, 2, false, Box::new(move |_, m| Ok(a(m) * a(m)))),
        sym("(A+B)^-1", -1.0, 2, false, Box::new(move |_, m| Ok((a(m) + m.b_a).inv()))),
        sym("(lambda+a)/lambda", 0.0, 1, false, Box::new(move |_, m| Ok(w2(m) / m.lambda))),
        sym("lambda/(lambda+a)", 0.0, 1, false, Box::new(move |_, m| Ok(m.lambda / w2(m)))),
        sym("(B-A)/sqrt(lambda+a)", 0.0, 2, false, Box::new(move |_, m| Ok(b_minus_a(m) / w2(m).sqrt()))),
        sym(
            "C^-1",
            0.0,
            2,
            false,
            Box::new(|p, m| Ok(p.beta * (m.lambda + p.a) / m.lambda * fa_of(p, m)).map(|c| c.inv())),
        ),
        sym("C", 0.0, 2, false, Box::new(|p, m| Ok(p.beta * (m.lambda + p.a) / m.lambda * fa_of(p, m)))),
        sym("(lambda+a)A_a^-1", -2.0, 1, false, Box::new(move |_, m| Ok(w2(m) / eval_cal_a(m)))),
        sym("A_a/(lambda+a)", 2.0, 1, false, Box::new(move |_, m| Ok(eval_cal_a(m) / w2(m)))),
        sym("E_h", 1.0, 2, false, Box::new(|p, m| Ok(hbar_coeff(p, m)))),
        sym("B_script", 0.0, 2, false, Box::new(|_, m| Ok(shared_h_multiplier(m)))),
    ];
    for j in 1..=2usize {
        v.push(sym(&format!("L{j}^1"), 1.0, 1, true, Box::new(move |_, m| Ok(root(m, j)))));
        v.push(sym(&format!("L{j}^-1"), -1.0, 1, true, Box::new(move |_, m| Ok(root(m, j).inv()))));
        v.push(sym(&format!("(L{j}+A)^-1"), -1.0, 2, true, Box::new(move |_, m| Ok((root(m, j) + a(m)).inv()))));
        v.push(sym(&format!("(L{j}+B)^-1"), -1.0, 1, true, Box::new(move |_, m| Ok((root(m, j) + m.b_a).inv()))));
        v.push(sym(&format!("(L{j}-A)/(B^2-A^2)"), -1.0, 1, true, Box::new(move |_, m| Ok(l_minus_a(m, j) / w2(m)))));
        v.push(sym(&format!("(L{j}-B)/(B^2-A^2)"), -1.0, 1, true, Box::new(move |_, m| Ok(-b_minus_l(m, j) / w2(m)))));
        v.push(sym(
            &format!("(B-A)/(B^2-L{j}^2)"),
            -1.0,
            1,
            true,
            Box::new(move |_, m| Ok(b_minus_a(m) / (w2(m) - zroot(m, j)))),
        ));
        v.push(sym(
            &format!("(L{j}-A)/sqrt(lambda+a)"),
            0.0,
            2,
            true,
            Box::new(move |_, m| Ok(l_minus_a(m, j) / w2(m).sqrt())),
        ));
        v.push(sym(
            &format!("(B-L{j})/sqrt(lambda+a)"),
            0.0,
            1,
            true,
            Box::new(move |_, m| Ok(b_minus_l(m, j) / w2(m).sqrt())),
        ));
        v.push(sym(
            &format!("sqrt(lambda+a)/(B-L{j})"),
            0.0,
            1,
            true,
            Box::new(move |_, m| Ok(w2(m).sqrt() / b_minus_l(m, j))),
        ));
        for k in 1..=2usize {
            v.push(sym(
                &format!("(L{j}-A)/(B^2-L{k}^2)"),
                -1.0,
                1,
                true,
                Box::new(move |_, m| Ok(l_minus_a(m, j) / (w2(m) - zroot(m, k)))),
            ));
            v.push(sym(
                &format!("(L{j}-B)/(B^2-L{k}^2)"),
                -1.0,
                1,
                true,
                Box::new(move |_, m| Ok(-b_minus_l(m, j) / (w2(m) - zroot(m, k)))),
            ));
        }
    }
    v.push(sym(
        "(L1-L2)/sqrt(lambda+a)",
        0.0,
        1,
        true,
        Box::new(move |_, m| Ok((m.z1 - m.z2) / ((m.l1 + m.l2) * w2(m).sqrt()))),
    ));
    v
}

fn fa_of(params: &ModelParams, m: &ModeContext) -> C64 {
    let (_, _, t, ..) = normalized_variables(params, m);
    f_a(params, m.lambda, t)
}

/// Nested fourth-order central differences: `D^alpha_xi (tau d_tau)^ell m`.
fn weighted_derivative<F>(f: &F, lambda: C64, xi: &[f64], alpha: &[usize], ell: usize) -> Result<C64>
where
    F: Fn(C64, &[f64]) -> Result<C64>,
{
    const D1: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    const D2: [(f64, f64); 5] =
        [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];
    let xi_abs = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h_xi = 1e-3 * (1.0 + xi_abs);
    let tau = lambda.im;
    let h_tau = 1e-3 * (1.0 + tau.abs());
    // (weight, d lambda, d xi)
    let mut stencil: Vec<(f64, C64, Vec<f64>)> = vec![(1.0, C64::new(0.0, 0.0), vec![0.0; xi.len()])];
    for (i, &m) in alpha.iter().enumerate() {
        let taps: &[(f64, f64)] = match m {
            0 => continue,
            1 => &D1,
            2 => &D2,
            _ => return Err(Error::InvalidInput("derivative order above 2".into())),
        };
        let scale = h_xi.powi(m as i32);
        stencil = stencil
            .iter()
            .flat_map(|(w, dl, dx)| {
                taps.iter().map(move |(o, c)| {
                    let mut d = dx.clone();
                    d[i] += o * h_xi;
                    (w * c / scale, *dl, d)
                })
            })
            .collect();
    }
    if ell == 1 {
        if tau == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        stencil = stencil
            .iter()
            .flat_map(|(w, dl, dx)| {
                D1.iter().map(move |(o, c)| (w * c * tau / h_tau, dl + C64::new(0.0, o * h_tau), dx.clone()))
            })
            .collect();
    }
    let mut acc = C64::new(0.0, 0.0);
    for (w, dl, dx) in &stencil {
        let x: Vec<f64> = xi.iter().zip(dx).map(|(a, b)| a + b).collect();
        acc += *w * f(lambda + dl, &x)?;
    }
    Ok(acc)
}

/// One line of the multiplier table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub symbol_id: String,
    pub alpha: String,
    pub ell: usize,
    pub level: u32,
    pub constant: f64,
    pub argmax_lambda_re: f64,
    pub argmax_lambda_im: f64,
    pub argmax_xi: f64,
    /// Grid points where the symbol could not be evaluated (a singular
    /// amplitude solve) and which were left out of the supremum.
    pub skipped: usize,
}

/// Distance from the double root inside which per-root symbols are not
/// differentiated.
pub const ROOT_CROSSING_EXCLUSION: f64 = 0.05;

fn near_double_root(params: &ModelParams, lambda: C64) -> bool {
    eta_point(params).is_ok_and(|e| (lambda - e).norm() < ROOT_CROSSING_EXCLUSION * (1.0 + e))
}

/// `sup |D^alpha (tau d_tau)^ell m| / w` over the grid for every
/// `|alpha| <= max_alpha` and `ell` in `{0, 1}`, with
/// `w = W^{s - |alpha|}` (type 1) or `W^s |xi'|^{-|alpha|}` (type 2),
/// `W = |lambda|^{1/2} + 1 + |xi'|`.
pub fn multiplier_class_check(
    params: &ModelParams,
    symbol: &RegisteredSymbol,
    grid: &ScanGrid,
) -> Result<Vec<MultiplierRow>> {
    let dim = params.dim;
    let spec = &symbol.spec;
    let mut combos = Vec::new();
    for k in 0..=spec.max_alpha {
        for a in crate::field::multi_indices(dim - 1, k) {
            for ell in 0..=1 {
                combos.push((a.clone(), ell));
            }
        }
    }
    let points: Vec<(C64, f64)> = grid
        .lambda_samples
        .iter()
        .filter(|l| !(symbol.per_root && near_double_root(params, **l)))
        .flat_map(|l| grid.xi_samples.iter().map(move |x| (*l, *x)))
        .collect();
    let per_point: Vec<Option<Vec<f64>>> = points
        .par_iter()
        .map(|&(l, x)| {
            let xi = direction(dim, x);
            let base = ModeContext::new(params, l, &xi)?;
            let reference = Some((base.z1, base.z2));
            let f = |lam: C64, xv: &[f64]| -> Result<C64> {
                let m = tracked_mode(params, lam, xv, reference)?;
                symbol.eval(params, &m)
            };
            let w_base = l.norm().sqrt() + 1.0 + x;
            combos
                .iter()
                .map(|(a, ell)| {
                    let order: usize = a.iter().sum();
                    let w = if spec.kind == 1 {
                        w_base.powf(spec.order - order as f64)
                    } else {
                        w_base.powf(spec.order) * x.powi(-(order as i32))
                    };
                    Ok(weighted_derivative(&f, l, &xi, a, *ell)?.norm() / w)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .map(|r| match r {
            Err(Error::SingularSystem { .. }) => Ok(None),
            other => other.map(Some),
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = per_point.iter().filter(|v| v.is_none()).count();
    Ok(combos
        .iter()
        .enumerate()
        .map(|(c, (a, ell))| {
            let mut best = (0.0, 0usize);
            for (i, v) in per_point.iter().enumerate() {
                let Some(v) = v else { continue };
                if !(v[c] <= best.0) {
                    best = (v[c], i);
                }
            }
            let (l, x) = points.get(best.1).copied().unwrap_or((C64::new(0.0, 0.0), 0.0));
            MultiplierRow {
                symbol_id: spec.symbol_id.clone(),
                alpha: a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(""),
                ell: *ell,
                level: grid.level,
                constant: best.0,
                argmax_lambda_re: l.re,
                argmax_lambda_im: l.im,
                argmax_xi: x,
                skipped,
            }
        })
        .collect())
}

/// Constants below this fraction of a symbol's largest constant are ignored
/// by [`refinement_change`].
pub const NEGLIGIBLE_CONSTANT: f64 = 1e-3;

/// Compares constants of two refinement levels row by row; returns the
/// largest relative change and fails with `UnstableConstant` when a
/// constant grows by more than `2x` or is not finite.
pub fn refinement_change(coarse: &[MultiplierRow], fine: &[MultiplierRow]) -> Result<f64> {
    // Rows far below the symbol's largest constant are zero up to stencil
    // error and carry no information about stability.
    let scale = fine.iter().chain(coarse).map(|r| r.constant).fold(0.0, f64::max);
    let negligible = NEGLIGIBLE_CONSTANT * scale;
    let mut worst: f64 = 0.0;
    for (c, f) in coarse.iter().zip(fine) {
        let label = format!("{} alpha={} ell={}", c.symbol_id, c.alpha, c.ell);
        if !f.constant.is_finite() || f.constant > 2.0 * c.constant.max(negligible) {
            return Err(Error::UnstableConstant { symbol: label, coarse: c.constant, fine: f.constant });
        }
        let local = c.constant.max(f.constant);
        if local > negligible {
            worst = worst.max((f.constant - c.constant).abs() / local);
        }
    }
    Ok(worst)
}

/// Growth factor above which [`range_growth`] reports a symbol as unbounded.
pub const MAX_RANGE_GROWTH: f64 = 2.0;

/// Grid that continues `base` past its largest `|xi'|` by a factor of 100,
/// at the given level.
pub fn extended_xi_grid(params: &ModelParams, level: u32, lambda_max: f64, xi_max: f64) -> ScanGrid {
    ScanGrid::new(params, level, lambda_max, xi_max, 100.0 * xi_max)
}

/// Largest factor by which a symbol's constants grow from `base` to a check
/// on `extended`. Refinement cannot see a supremum that sits at the edge of
/// the `|xi'|` range and keeps growing past it; this can.
pub fn range_growth(
    params: &ModelParams,
    symbol: &RegisteredSymbol,
    extended: &ScanGrid,
    base: &[MultiplierRow],
) -> Result<f64> {
    let far = multiplier_class_check(params, symbol, extended)?;
    let scale = base.iter().map(|r| r.constant).fold(0.0, f64::max);
    let negligible = NEGLIGIBLE_CONSTANT * scale;
    Ok(base
        .iter()
        .zip(&far)
        .filter(|(b, f)| b.constant.max(f.constant) > negligible)
        .map(|(b, f)| if f.constant.is_finite() { f.constant / b.constant.max(negligible) } else { f64::INFINITY })
        .fold(0.0, f64::max))
}

/// Writes the multiplier table as CSV.
pub fn multiplier_csv(rows: &[MultiplierRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Empirical root bounds over a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootBounds {
    pub level: u32,
    /// `min |z_j / (lambda + a)|`.
    pub k_min: f64,
    /// `max |z_j / (lambda + a)|`.
    pub k_max: f64,
    /// `min Re L_j / (|lambda|^{1/2} + 1 + |xi'|)`.
    pub re_l_lower: f64,
    /// `min |z_j| / (|lambda| + 1)`.
    pub c1: f64,
    /// `max |z_j| / (|lambda| + 1)`.
    pub c2: f64,
    /// `max |tau d_tau z_j| / |lambda|` away from the double root.
    pub tau_derivative: f64,
    /// `max_j |z_j/(lambda+a) - z_lim|` over the largest radius of the grid.
    pub limit_deviation: f64,
}

pub fn root_bound_check(params: &ModelParams, grid: &ScanGrid) -> Result<RootBounds> {
    let rows: Vec<[f64; 6]> = grid
        .lambda_samples
        .par_iter()
        .map(|&l| {
            let (z1, z2) = characteristic_roots(params, l);
            let w2 = l + params.a;
            let (t1, t2) = ((z1 / w2).norm(), (z2 / w2).norm());
            let s = l.norm() + 1.0;
            let mut re_min = f64::INFINITY;
            for &x in &grid.xi_samples {
                let m = ModeContext::new(params, l, &direction(params.dim, x))?;
                let w = l.norm().sqrt() + 1.0 + x;
                re_min = re_min.min(m.l1.re / w).min(m.l2.re / w);
            }
            let mut tau_d: f64 = 0.0;
            if !near_double_root(params, l) && l.im != 0.0 {
                for j in 1..=2 {
                    let f = |lam: C64, _: &[f64]| -> Result<C64> {
                        let (a, b) = characteristic_roots(params, lam);
                        let (r1, r2) = (z1, z2);
                        let (a, b) = if (a - r2).norm() + (b - r1).norm() < (a - r1).norm() + (b - r2).norm() {
                            (b, a)
                        } else {
                            (a, b)
                        };
                        Ok(if j == 1 { a } else { b })
                    };
                    let d = weighted_derivative(&f, l, &[], &[], 1)?;
                    tau_d = tau_d.max(d.norm() / l.norm());
                }
            }
            Ok([t1.min(t2), t1.max(t2), re_min, z1.norm().min(z2.norm()) / s, z1.norm().max(z2.norm()) / s, tau_d])
        })
        .collect::<Result<Vec<_>>>()?;
    let fold_min = |k: usize| rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
    let fold_max = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    let r_max = grid.lambda_samples.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let limit_deviation = grid
        .lambda_samples
        .iter()
        .filter(|l| l.norm() >= r_max * (1.0 - 1e-12))
        .map(|&l| {
            let nr = normalized_roots(params, l);
            let d = |z: C64| (z - nr.z_minus).norm().min((z - nr.z_plus).norm());
            d(nr.z1_tilde).max(d(nr.z2_tilde))
        })
        .fold(0.0, f64::max);
    Ok(RootBounds {
        level: grid.level,
        k_min: fold_min(0),
        k_max: fold_max(1),
        re_l_lower: fold_min(2),
        c1: fold_min(3),
        c2: fold_max(4),
        tau_derivative: fold_max(5),
        limit_deviation,
    })
}

/// Approach of the regular branch to the confluent branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaContinuityReport {
    pub eps: Vec<f64>,
    /// Largest relative difference of `C, D, A0, P, A_jk` per `eps`.
    pub coefficient_error: Vec<f64>,
    /// Largest relative difference of the `(u, p, Q)` profiles per `eps`.
    pub profile_error: Vec<f64>,
    /// Least-squares order in `eps` of the coefficient differences.
    pub coefficient_order: f64,
    pub profile_order: f64,
}

fn rel(a: &[C64], b: &[C64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let s = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

fn flat_v(v: &Vec3, n: usize) -> Vec<C64> {
    v[..n].to_vec()
}

fn flat_m(m: &Mat3, n: usize) -> Vec<C64> {
    (0..n).flat_map(|j| m[j][..n].to_vec()).collect()
}

fn profile_samples(p: &ModeProfile, x: &[f64]) -> Vec<ProfileSample> {
    x.iter().map(|&v| p.value(v)).collect()
}

/// Regular-branch coefficients and profiles at `eta + eps e^{i phi}` for
/// three approach directions against the confluent-branch values.
pub fn eta_continuity_check(
    params: &ModelParams,
    xi_values: &[f64],
    data: &BoundaryModeData,
    eps: &[f64],
) -> Result<EtaContinuityReport> {
    let eta = eta_point(params)?;
    let n = params.dim;
    let x: Vec<f64> = (0..=200).map(|i| 10.0 * i as f64 / 200.0).collect();
    let rays = [0.0, PI / 2.0, 0.75 * PI];
    let mut coefficient_error = Vec::new();
    let mut profile_error = Vec::new();
    for &e in eps {
        let mut ce: f64 = 0.0;
        let mut pe: f64 = 0.0;
        for &xv in xi_values {
            let xi = direction(n, xv);
            let (tmode, tilde) = assemble_amplitudes_degenerate(params, &xi, data)?;
            let tsol = crate::assembly::ModeSolution {
                mode: tmode,
                amplitudes: crate::assembly::AmplitudeSet::Degenerate(tilde.clone()),
            };
            let tprof = profile_samples(&eval_profile(&tsol), &x);
            for &phi in &rays {
                let lambda = C64::new(eta, 0.0) + C64::from_polar(e * eta, phi);
                let mut mode = ModeContext::new(params, lambda, &xi)?;
                mode.degenerate = false;
                let amps = assemble_amplitudes(params, &mode, data)?;
                ce = ce
                    .max(rel(&[amps.c], &[tilde.c]))
                    .max(rel(&[amps.d], &[tilde.d]))
                    .max(rel(&flat_v(&amps.a0, n), &flat_v(&tilde.a0, n)))
                    .max(rel(&flat_m(&amps.p, n), &flat_m(&tilde.p, n)))
                    .max(rel(&flat_m(&amps.ajk, n), &flat_m(&tilde.ajk, n)));
                let sol =
                    crate::assembly::ModeSolution { mode, amplitudes: crate::assembly::AmplitudeSet::Regular(amps) };
                let prof = profile_samples(&eval_profile(&sol), &x);
                let pack = |s: &[ProfileSample]| -> Vec<C64> {
                    s.iter()
                        .flat_map(|v| flat_v(&v.u, n).into_iter().chain(std::iter::once(v.p)).chain(flat_m(&v.q, n)))
                        .collect()
                };
                pe = pe.max(rel(&pack(&prof), &pack(&tprof)));
            }
        }
        coefficient_error.push(ce);
        profile_error.push(pe);
    }
    let order =
        |errs: &[f64]| slope(&eps.iter().zip(errs).map(|(e, v)| (e.ln(), v.max(1e-300).ln())).collect::<Vec<_>>());
    Ok(EtaContinuityReport {
        eps: eps.to_vec(),
        coefficient_order: order(&coefficient_error),
        profile_order: order(&profile_error),
        coefficient_error,
        profile_error,
    })
}

/// Closed form against the finite-difference oracle for one mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRow {
    pub lambda: C64,
    pub xi: Vec<f64>,
    /// Relative L2 difference of `(u, Q)` at `n` intervals.
    pub error: f64,
    /// The same at `n / 2` intervals.
    pub error_half: f64,
    /// `log2(error_half / error)`.
    pub order: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleComparison {
    pub n: usize,
    pub rows: Vec<OracleRow>,
    pub max_error: f64,
    pub min_order: f64,
    pub max_order: f64,
}

/// Stretching of the oracle grid used by the comparison.
pub const ORACLE_STRETCH: f64 = 4.0;

fn oracle_l2_error(params: &ModelParams, prof: &ModeProfile, o: &OracleProfile) -> f64 {
    let n = params.dim;
    let w = trapezoid(&o.x);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &xv) in o.x.iter().enumerate() {
        let e = prof.value(xv);
        for j in 0..n {
            num += w[i] * (o.u[i][j] - e.u[j]).norm_sqr();
            den += w[i] * e.u[j].norm_sqr();
            for l in 0..n {
                num += w[i] * (o.q[i][j * n + l] - e.q[j][l]).norm_sqr();
                den += w[i] * e.q[j][l].norm_sqr();
            }
        }
    }
    (num / den).sqrt()
}

/// Trapezoid weights on arbitrary nodes.
pub fn trapezoid(x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; x.len()];
    for i in 0..x.len().saturating_sub(1) {
        let h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Compares closed-form and finite-difference profiles on `n_modes` random
/// modes (`|lambda|` in `[1, 50]`, `|xi'|` in `[0.3, 3]`) at `n` and `n / 2`
/// intervals of the stretched grid on `[0, 40 / min decay]`.
pub fn oracle_comparison(params: &ModelParams, n_modes: usize, n: usize, seed: u64) -> Result<OracleComparison> {
    let mut rng = crate::sample::rng(seed);
    let mut modes = Vec::new();
    while modes.len() < n_modes {
        let l = crate::sample::sector_lambda(&mut rng, params, 1.0, 50.0);
        let xi = crate::sample::tangential_frequency(&mut rng, params.dim, 0.3, 3.0);
        let d = crate::sample::boundary_data(&mut rng, params.dim);
        if ModeContext::new(params, l, &xi).is_ok_and(|m| !m.degenerate) {
            modes.push((l, xi, d));
        }
    }
    let dim = params.dim;
    let rows = modes
        .par_iter()
        .map(|(l, xi, d)| {
            let sol = solve_mode(params, *l, xi, d)?;
            let prof = eval_profile(&sol);
            let h: Vec<C64> = d.h[..dim].to_vec();
            let hq = flat_m(&d.hq, dim);
            let x_max = sol.mode.x_max();
            let mut errs = Vec::new();
            for m in [n / 2, n] {
                let g = StretchedGrid { x_max, n: m, stretch: ORACLE_STRETCH };
                let o = TruncatedBvp::new(params, *l, xi, g)?.solve(&h, &hq, None, None);
                errs.push(oracle_l2_error(params, &prof, &o));
            }
            Ok(OracleRow {
                lambda: *l,
                xi: xi.clone(),
                error: errs[1],
                error_half: errs[0],
                order: (errs[0] / errs[1]).log2(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_error = rows.iter().map(|r: &OracleRow| r.error).fold(0.0, f64::max);
    let min_order = rows.iter().map(|r| r.order).fold(f64::INFINITY, f64::min);
    let max_order = rows.iter().map(|r| r.order).fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleComparison { n, rows, max_error, min_order, max_order })
}

/// One sample of the resolvent-estimate surrogate: a single tangential
/// mode `e^{i xi'.x'}` with boundary data and an interior forcing
/// `(f, G) x_N^2 e^{-x_N}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventSample {
    pub lambda: C64,
    pub xi: Vec<f64>,
    pub data: BoundaryModeData,
    pub f: Vec3,
    pub g: Mat3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventRatioReport {
    /// `(|lambda|, LHS, RHS, ratio)` per sample; zero data is skipped.
    pub samples: Vec<(f64, f64, f64, f64)>,
    pub max_ratio: f64,
    /// Max ratio over the upper half of the `|lambda|` range (log scale)
    /// divided by the max over the lower half.
    pub growth: f64,
}

/// Deterministic sample set: `count` values of `|lambda|` log-spaced in
/// `[r_min, r_max]` at varying angles in the sector, `|xi'|` in `[0.5, 5]`.
pub fn resolvent_samples(
    params: &ModelParams,
    count: usize,
    r_min: f64,
    r_max: f64,
    seed: u64,
) -> Vec<ResolventSample> {
    use rand::Rng;
    let mut rng = crate::sample::rng(seed);
    let opening = PI - params.theta;
    let n = params.dim;
    log_space(r_min, r_max, count)
        .into_iter()
        .map(|r| {
            let lambda = C64::from_polar(r, rng.gen_range(-opening..opening) * 0.9);
            let xi = crate::sample::tangential_frequency(&mut rng, n, 0.5, 5.0);
            let data = crate::sample::boundary_data(&mut rng, n);
            let mut f = [C64::new(0.0, 0.0); 3];
            for v in f.iter_mut().take(n) {
                *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let g = crate::sample::boundary_data(&mut rng, n).hq;
            ResolventSample { lambda, xi, data, f, g }
        })
        .collect()
}

/// `sum_m binom(k, m) |xi|^{2(k-m)} |v^{(m)}|^2`: squared norm of all
/// order-`k` derivatives of `v(x_N) e^{i xi'.x'}` at one point, given the
/// normal derivatives `v^{(m)}`.
fn derivative_energy(xi2: f64, normal: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    let mut binom = 1.0;
    for (m, v) in normal.iter().enumerate().take(k + 1) {
        s += binom * xi2.powi((k - m) as i32) * v;
        binom = binom * (k - m) as f64 / (m + 1) as f64;
    }
    s
}

/// Normal derivatives of orders `0..=3` of nodal values, by six-point
/// finite differences.
fn nodal_derivatives(x: &[f64], v: &[C64]) -> Vec<[C64; 4]> {
    let n = x.len();
    let width = 6.min(n);
    (0..n)
        .map(|k| {
            let s = k.saturating_sub(width / 2).min(n - width);
            let w = fd_weights(x[k], &x[s..s + width], 3);
            let mut out = [C64::new(0.0, 0.0); 4];
            for (m, o) in out.iter_mut().enumerate() {
                *o = w[m].iter().enumerate().map(|(i, c)| *c * v[s + i]).sum();
            }
            out
        })
        .collect()
}

/// `LHS / RHS` of the resolvent estimate in `L^2` for each sample. The
/// solution is the closed-form boundary profile plus the finite-difference
/// response to the forcing; `(h, H)` enters the right side through its
/// extension `(h, H) e^{-(|lambda|^{1/2} + 1) x_N}`.
pub fn resolvent_ratio_check(
    params: &ModelParams,
    samples: &[ResolventSample],
    n: usize,
) -> Result<ResolventRatioReport> {
    let dim = params.dim;
    let rows: Vec<Option<(f64, f64, f64, f64)>> = samples
        .par_iter()
        .map(|s| {
            let forcing_zero = s.f.iter().all(|v| v.norm() == 0.0) && s.g.iter().flatten().all(|v| v.norm() == 0.0);
            if s.data.norm(dim) == 0.0 && forcing_zero {
                return Ok(None);
            }
            let sol = solve_mode(params, s.lambda, &s.xi, &s.data)?;
            let prof = eval_profile(&sol);
            let grid = StretchedGrid { x_max: sol.mode.x_max(), n, stretch: ORACLE_STRETCH };
            let x = grid.nodes();
            let phi: Vec<f64> = x.iter().map(|v| v * v * (-v).exp()).collect();
            let fv: Vec<Vec<C64>> = phi.iter().map(|p| (0..dim).map(|j| s.f[j] * *p).collect()).collect();
            let gv: Vec<Vec<C64>> =
                phi.iter().map(|p| flat_m(&s.g, dim).into_iter().map(|v| v * *p).collect()).collect();
            let zeros = vec![C64::new(0.0, 0.0); dim * dim];
            let o =
                TruncatedBvp::new(params, s.lambda, &s.xi, grid)?.solve(&zeros[..dim], &zeros, Some(&fv), Some(&gv));
            let po = o.p_nodes();
            let nu = dim;
            let nq = dim * dim;
            // per component nodal derivative tables of the forced part
            let du: Vec<Vec<[C64; 4]>> =
                (0..nu).map(|j| nodal_derivatives(&x, &o.u.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
            let dq: Vec<Vec<[C64; 4]>> =
                (0..nq).map(|j| nodal_derivatives(&x, &o.q.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
            let dp = nodal_derivatives(&x, &po);
            let xi2: f64 = s.xi.iter().map(|v| v * v).sum();
            let lam = s.lambda.norm();
            let kappa = lam.sqrt() + 1.0;
            let w = trapezoid(&x);
            // squared norms accumulated: u orders 0..2, p gradient, Q orders 0..3, f, G orders 0..1
            let mut eu = [0.0; 3];
            let mut eq = [0.0; 4];
            let mut ep = 0.0;
            let mut ef = 0.0;
            let mut eg = [0.0; 2];
            for (i, &xv) in x.iter().enumerate() {
                let cf = prof.eval(xv, 3);
                let mut nu_e = [0.0; 4];
                for j in 0..nu {
                    for m in 0..4 {
                        nu_e[m] += (cf[m].u[j] + du[j][i][m]).norm_sqr();
                    }
                }
                let mut nq_e = [0.0; 4];
                for j in 0..nq {
                    for m in 0..4 {
                        nq_e[m] += (cf[m].q[j / dim][j % dim] + dq[j][i][m]).norm_sqr();
                    }
                }
                let np_e = [(cf[0].p + dp[i][0]).norm_sqr(), (cf[1].p + dp[i][1]).norm_sqr()];
                for (k, e) in eu.iter_mut().enumerate() {
                    *e += w[i] * derivative_energy(xi2, &nu_e, k);
                }
                for (k, e) in eq.iter_mut().enumerate() {
                    *e += w[i] * derivative_energy(xi2, &nq_e, k);
                }
                ep += w[i] * derivative_energy(xi2, &np_e, 1);
                ef += w[i] * phi[i] * phi[i] * (0..dim).map(|j| s.f[j].norm_sqr()).sum::<f64>();
                let dphi = (2.0 * xv - xv * xv) * (-xv).exp();
                let gn: f64 = flat_m(&s.g, dim).iter().map(|v| v.norm_sqr()).sum();
                eg[0] += w[i] * phi[i] * phi[i] * gn;
                eg[1] += w[i] * derivative_energy(xi2, &[phi[i] * phi[i] * gn, dphi * dphi * gn], 1);
            }
            let lhs = lam * eu[0].sqrt()
                + lam.sqrt() * eu[1].sqrt()
                + eu[2].sqrt()
                + ep.sqrt()
                + lam.powf(1.5) * eq[0].sqrt()
                + lam * eq[1].sqrt()
                + lam.sqrt() * eq[2].sqrt()
                + eq[3].sqrt();
            // extension of (h, H): exact integrals of e^{-2 kappa x}
            let dn: f64 = s.data.norm(dim).powi(2);
            let ext = |k: usize| -> f64 {
                let normal: Vec<f64> = (0..=k).map(|m| kappa.powi(2 * m as i32) * dn / (2.0 * kappa)).collect();
                derivative_energy(xi2, &normal, k)
            };
            let rhs = ef.sqrt()
                + lam.sqrt() * eg[0].sqrt()
                + eg[1].sqrt()
                + lam * ext(0).sqrt()
                + lam.sqrt() * ext(1).sqrt()
                + ext(2).sqrt();
            Ok(Some((lam, lhs, rhs, lhs / rhs)))
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, f64, f64, f64)> = rows.into_iter().flatten().collect();
    let max_ratio = samples.iter().map(|s| s.3).fold(0.0, f64::max);
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |a, s| (a.0.min(s.0), a.1.max(s.0)));
    let mid = (lo * hi).sqrt();
    let low = samples.iter().filter(|s| s.0 < mid).map(|s| s.3).fold(0.0, f64::max);
    let high = samples.iter().filter(|s| s.0 >= mid).map(|s| s.3).fold(0.0, f64::max);
    Ok(ResolventRatioReport { samples, max_ratio, growth: high / low })
}

/// Random data with a zero `H_NN` entry is still admissible; this builds
/// the data used by the continuity check.
pub fn continuity_data(dim: usize, seed: u64) -> BoundaryModeData {
    let mut rng = crate::sample::rng(seed);
    let mut d = crate::sample::boundary_data(&mut rng, dim);
    if d.hq == zero_mat() {
        d.hq[0][0] = C64::new(1.0, 0.0);
    }
    d
}

/// Outcome of the randomized residual suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSuiteReport {
    pub samples: usize,
    pub betas: Vec<f64>,
    pub max_residual: f64,
    /// `(beta, lambda, |xi'|, residual)` of the worst sample.
    pub worst: (f64, C64, f64, f64),
}

/// Largest `|xi'|` the residual suite samples by default.
///
/// The exponential representation carries amplitudes of size
/// `~ |xi'|^3 / |lambda|` that cancel to O(1), so in double precision the
/// residual grows like `eps (|xi'|^2 / |lambda|)^3`; with `|lambda| >= 1`
/// this bound keeps it near `1e-10`.
pub const RESIDUAL_XI_MAX: f64 = 10.0;

/// Solves `samples` random modes per coupling in `betas` (`|lambda|` in
/// `[r, 1e3]` inside the sector, `|xi'|` log-uniform in `[1e-2, xi_max]`)
/// and evaluates the normalised sup-residual of the mode system and
/// boundary conditions on `points` nodes spanning the decay length.
pub fn residual_suite(
    params: &ModelParams,
    betas: &[f64],
    samples: usize,
    points: usize,
    xi_max: f64,
    seed: u64,
) -> Result<ResidualSuiteReport> {
    if !(xi_max > 1e-2) {
        return Err(Error::InvalidInput(format!("xi_max {xi_max} must exceed 1e-2")));
    }
    let mut cases = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        let p = ModelParams { beta, ..params.clone() };
        p.validate()?;
        let mut rng = crate::sample::rng(seed.wrapping_add(i as u64));
        for _ in 0..samples {
            let l = crate::sample::sector_lambda(&mut rng, &p, p.r, 1e3);
            let xi = crate::sample::tangential_frequency(&mut rng, p.dim, 1e-2, xi_max);
            let d = crate::sample::boundary_data(&mut rng, p.dim);
            cases.push((p.clone(), l, xi, d));
        }
    }
    let results = cases
        .par_iter()
        .map(|(p, l, xi, d)| {
            let sol = solve_mode(p, *l, xi, d)?;
            let prof = eval_profile(&sol);
            let x_max = 20.0 / sol.mode.min_decay();
            let grid = crate::profile::uniform_grid(x_max, points);
            let r = crate::profile::mode_residual(p, &sol.mode, d, &prof, &grid).max();
            Ok((p.beta, *l, xi.iter().map(|v| v * v).sum::<f64>().sqrt(), r))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst =
        results.iter().copied().fold((0.0, C64::new(0.0, 0.0), 0.0, -1.0), |a, b| if b.3 > a.3 { b } else { a });
    Ok(ResidualSuiteReport { samples: results.len(), betas: betas.to_vec(), max_residual: worst.3.max(0.0), worst })
}
