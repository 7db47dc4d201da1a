//! Scalar functions of a mode that appear as denominators of the amplitude
//! formulas, in forms that stay accurate across the whole sector.
//!
//! `F_a` and `G_a` are the normalisations of the two denominators in the
//! variables `t = A / sqrt(lambda + a)` and `z_j / (lambda + a)`. For large
//! `|t|` the direct expression of `F_a` cancels catastrophically, so a
//! truncated Laurent series in `1/t^2` is used instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::symbols::{characteristic_roots, ModeContext};
use crate::tensor::{Mat3, Vec3, I};
use crate::C64;

/// `|t|` above which `F_a` is taken from the Laurent series.
pub const TAIL_SWITCH: f64 = 8.0;

/// Laurent coefficients of the numerator of `F_a`: `(power of 1/t^2, i, j, c)`
/// contributes `c z1^i z2^j / t^(2 power)`.
const TAIL: &[(usize, i32, i32, f64)] = &[
    (0, 1, 1, -0.5),
    (1, 2, 2, 0.0625),
    (1, 2, 1, -0.0625),
    (1, 1, 2, -0.0625),
    (1, 1, 1, -0.0625),
    (2, 3, 2, -0.03125),
    (2, 3, 1, 0.03125),
    (2, 2, 3, -0.03125),
    (2, 2, 2, 0.046875),
    (2, 2, 1, 0.015625),
    (2, 1, 3, 0.03125),
    (2, 1, 2, 0.015625),
    (2, 1, 1, -0.015625),
    (3, 4, 2, 0.01953125),
    (3, 4, 1, -0.01953125),
    (3, 3, 3, 0.015625),
    (3, 3, 2, -0.0234375),
    (3, 3, 1, -0.0078125),
    (3, 2, 4, 0.01953125),
    (3, 2, 3, -0.0234375),
    (3, 2, 2, 0.00390625),
    (3, 2, 1, -0.0078125),
    (3, 1, 4, -0.01953125),
    (3, 1, 3, -0.0078125),
    (3, 1, 2, -0.0078125),
    (3, 1, 1, 0.01953125),
    (4, 5, 2, -0.013671875),
    (4, 5, 1, 0.013671875),
    (4, 4, 3, -0.009765625),
    (4, 4, 2, 0.0146484375),
    (4, 4, 1, 0.0048828125),
    (4, 3, 4, -0.009765625),
    (4, 3, 3, 0.01171875),
    (4, 3, 2, -0.001953125),
    (4, 3, 1, 0.00390625),
    (4, 2, 5, -0.013671875),
    (4, 2, 4, 0.0146484375),
    (4, 2, 3, -0.001953125),
    (4, 2, 2, -0.001953125),
    (4, 2, 1, 0.0068359375),
    (4, 1, 5, 0.013671875),
    (4, 1, 4, 0.0048828125),
    (4, 1, 3, 0.00390625),
    (4, 1, 2, 0.0068359375),
    (4, 1, 1, -0.01953125),
    (5, 6, 2, 0.01025390625),
    (5, 6, 1, -0.01025390625),
    (5, 5, 3, 0.0068359375),
    (5, 5, 2, -0.01025390625),
    (5, 5, 1, -0.00341796875),
    (5, 4, 4, 0.006103515625),
    (5, 4, 3, -0.00732421875),
    (5, 4, 2, 0.001220703125),
    (5, 4, 1, -0.00244140625),
    (5, 3, 5, 0.0068359375),
    (5, 3, 4, -0.00732421875),
    (5, 3, 3, 0.0009765625),
    (5, 3, 2, 0.0009765625),
    (5, 3, 1, -0.00341796875),
    (5, 2, 6, 0.01025390625),
    (5, 2, 5, -0.01025390625),
    (5, 2, 4, 0.001220703125),
    (5, 2, 3, 0.0009765625),
    (5, 2, 2, 0.001708984375),
    (5, 2, 1, -0.00634765625),
    (5, 1, 6, -0.01025390625),
    (5, 1, 5, -0.00341796875),
    (5, 1, 4, -0.00244140625),
    (5, 1, 3, -0.00341796875),
    (5, 1, 2, -0.00634765625),
    (5, 1, 1, 0.01904296875),
    (6, 7, 2, -0.008056640625),
    (6, 7, 1, 0.008056640625),
    (6, 6, 3, -0.005126953125),
    (6, 6, 2, 0.0076904296875),
    (6, 6, 1, 0.0025634765625),
    (6, 5, 4, -0.0042724609375),
    (6, 5, 3, 0.005126953125),
    (6, 5, 2, -0.0008544921875),
    (6, 5, 1, 0.001708984375),
    (6, 4, 5, -0.0042724609375),
    (6, 4, 4, 0.00457763671875),
    (6, 4, 3, -0.0006103515625),
    (6, 4, 2, -0.0006103515625),
    (6, 4, 1, 0.00213623046875),
    (6, 3, 6, -0.005126953125),
    (6, 3, 5, 0.005126953125),
    (6, 3, 4, -0.0006103515625),
    (6, 3, 3, -0.00048828125),
    (6, 3, 2, -0.0008544921875),
    (6, 3, 1, 0.003173828125),
    (6, 2, 7, -0.008056640625),
    (6, 2, 6, 0.0076904296875),
    (6, 2, 5, -0.0008544921875),
    (6, 2, 4, -0.0006103515625),
    (6, 2, 3, -0.0008544921875),
    (6, 2, 2, -0.0015869140625),
    (6, 2, 1, 0.0059814453125),
    (6, 1, 7, 0.008056640625),
    (6, 1, 6, 0.0025634765625),
    (6, 1, 5, 0.001708984375),
    (6, 1, 4, 0.00213623046875),
    (6, 1, 3, 0.003173828125),
    (6, 1, 2, 0.0059814453125),
    (6, 1, 1, -0.01849365234375),
    (7, 8, 2, 0.0065460205078125),
    (7, 8, 1, -0.0065460205078125),
    (7, 7, 3, 0.0040283203125),
    (7, 7, 2, -0.00604248046875),
    (7, 7, 1, -0.00201416015625),
    (7, 6, 4, 0.003204345703125),
    (7, 6, 3, -0.00384521484375),
    (7, 6, 2, 0.000640869140625),
    (7, 6, 1, -0.00128173828125),
    (7, 5, 5, 0.00299072265625),
    (7, 5, 4, -0.003204345703125),
    (7, 5, 3, 0.00042724609375),
    (7, 5, 2, 0.00042724609375),
    (7, 5, 1, -0.001495361328125),
    (7, 4, 6, 0.003204345703125),
    (7, 4, 5, -0.003204345703125),
    (7, 4, 4, 0.0003814697265625),
    (7, 4, 3, 0.00030517578125),
    (7, 4, 2, 0.0005340576171875),
    (7, 4, 1, -0.001983642578125),
    (7, 3, 7, 0.0040283203125),
    (7, 3, 6, -0.00384521484375),
    (7, 3, 5, 0.00042724609375),
    (7, 3, 4, 0.00030517578125),
    (7, 3, 3, 0.00042724609375),
    (7, 3, 2, 0.00079345703125),
    (7, 3, 1, -0.00299072265625),
    (7, 2, 8, 0.0065460205078125),
    (7, 2, 7, -0.00604248046875),
    (7, 2, 6, 0.000640869140625),
    (7, 2, 5, 0.00042724609375),
    (7, 2, 4, 0.0005340576171875),
    (7, 2, 3, 0.00079345703125),
    (7, 2, 2, 0.001495361328125),
    (7, 2, 1, -0.00567626953125),
    (7, 1, 8, -0.0065460205078125),
    (7, 1, 7, -0.00201416015625),
    (7, 1, 6, -0.00128173828125),
    (7, 1, 5, -0.001495361328125),
    (7, 1, 4, -0.001983642578125),
    (7, 1, 3, -0.00299072265625),
    (7, 1, 2, -0.00567626953125),
    (7, 1, 1, 0.0179595947265625),
];

/// Denominator pieces shared by several formulas.
#[derive(Debug, Clone, Copy)]
struct Pieces {
    a: C64,
    b: C64,
    l1: C64,
    l2: C64,
    d1: C64,
    d2: C64,
}

fn pieces(mode: &ModeContext) -> Pieces {
    // B^2 - L_j^2 = lambda + a - z_j, formed without cancellation
    let w2 = mode.lambda + mode.a;
    Pieces { a: C64::from(mode.a_abs), b: mode.b_a, l1: mode.l1, l2: mode.l2, d1: w2 - mode.z1, d2: w2 - mode.z2 }
}

fn brace(p: &Pieces, l: C64) -> C64 {
    let (a, b) = (p.a, p.b);
    2.0 * a * a * l - (b * b + a * a) * (l * l + a * a) / (2.0 * b)
}

/// First summand of the numerator of the pressure denominator.
pub fn i1(params: &ModelParams, mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let (a, b) = (p.a, p.b);
    params.beta * a * a / (mode.lambda + mode.a) * (2.0 * a * a - a * (b * b + a * a) / b)
}

/// Second summand, still carrying the divided difference.
pub fn i2(params: &ModelParams, mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let beta = params.beta;
    -beta * p.l1 * (p.l2 - p.a) / p.d1 * brace(&p, p.l1) + beta * p.l2 * (p.l1 - p.a) / p.d2 * brace(&p, p.l2)
}

/// `I2 / (L2 - L1)` written symmetrically in `L1, L2`, free of the division.
pub fn i2_over_diff(params: &ModelParams, mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let (a, b, l1, l2) = (p.a, p.b, p.l1, p.l2);
    let beta = params.beta;
    let (a2, b2) = (a * a, b * b);
    let s = l1 * l2;
    (4.0 * beta * a2 * b * (s * (b2 + s) - a * b2 * (l1 + l2))
        - beta * (b2 + a2) * ((b2 + a2) * s * (l1 + l2) - a * b2 * (l1 * l1 + s + l2 * l2 + a2) + a * s * (s - a2)))
        / (2.0 * b * p.d1 * p.d2)
}

/// Pressure denominator through the divided difference, `(I1 + I2/(L2-L1)) / lambda`.
pub fn cal_c_naive(params: &ModelParams, mode: &ModeContext) -> C64 {
    (i1(params, mode) + i2(params, mode) / (mode.l2 - mode.l1)) / mode.lambda
}

/// Pressure denominator with the symmetric form of `I2/(L2-L1)`.
pub fn cal_c_symmetric(params: &ModelParams, mode: &ModeContext) -> C64 {
    (i1(params, mode) + i2_over_diff(params, mode)) / mode.lambda
}

/// Pressure denominator `beta (lambda + a) / lambda * F_a`, accurate for
/// all `|t|`. Requires `beta != 0` and a non-degenerate mode.
pub fn eval_cal_c(params: &ModelParams, mode: &ModeContext) -> Result<C64> {
    if params.beta == 0.0 {
        return Err(Error::BetaZero);
    }
    if mode.degenerate {
        return Err(Error::DegenerateLambda { lambda: format!("{}", mode.lambda), eta: mode.eta.unwrap_or(f64::NAN) });
    }
    Ok(cal_c_from_fa(params, mode))
}

/// The same quantity at the degeneracy point, where the symmetric form
/// has a finite value.
pub fn eval_cal_c_degenerate(params: &ModelParams, xi_prime: &[f64]) -> Result<C64> {
    let eta = crate::symbols::eta_point(params)?;
    let mode = ModeContext::new(params, C64::new(eta, 0.0), xi_prime)?;
    Ok(cal_c_from_fa(params, &mode))
}

fn cal_c_from_fa(params: &ModelParams, mode: &ModeContext) -> C64 {
    let w = mode.lambda + params.a;
    params.beta * w / mode.lambda * f_a_mode(params, mode)
}

/// Velocity denominator in its defining form.
pub fn cal_a_defining(mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let (a, b, l1, l2) = (p.a, p.b, p.l1, p.l2);
    b * b * b * (l1 + l2) - a * a * b * b - a * a * l1 * l2
}

/// Velocity denominator rearranged as `B(B^2-A^2)(L1+L2) - A^2(B-L1)(B-L2)`,
/// with `B - L_j = (B^2 - L_j^2)/(B + L_j)` to avoid cancellation at large `A`.
pub fn eval_cal_a(mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let (a, b, l1, l2) = (p.a, p.b, p.l1, p.l2);
    b * (mode.lambda + mode.a) * (l1 + l2) - a * a * p.d1 * p.d2 / ((b + l1) * (b + l2))
}

/// Velocity denominator on the confluent branch, `2 B^3 L0 - A^2 B^2 - A^2 L0^2`.
pub fn cal_a_degenerate(a: f64, b: C64, l0: C64) -> C64 {
    2.0 * b * b * b * l0 - a * a * b * b - a * a * l0 * l0
}

/// Normalised variables of a mode: `(z1~, z2~, t, L1/w, L2/w, B/w)`, `w = sqrt(lambda + a)`.
pub fn normalized_variables(params: &ModelParams, mode: &ModeContext) -> (C64, C64, C64, C64, C64, C64) {
    let w2 = mode.lambda + params.a;
    let w = w2.sqrt();
    (mode.z1 / w2, mode.z2 / w2, mode.a_abs / w, mode.l1 / w, mode.l2 / w, mode.b_a / w)
}

fn f_a_mode(params: &ModelParams, mode: &ModeContext) -> C64 {
    let (z1, z2, t, s1, s2, sb) = normalized_variables(params, mode);
    if t.norm() >= TAIL_SWITCH {
        f_a_tail(z1, z2, t)
    } else {
        f_a_direct(z1, z2, t, s1, s2, sb)
    }
}

/// `F_a` evaluated from its closed form; `s_j = sqrt(t^2 + z_j~)` and `sb = sqrt(1 + t^2)`.
pub fn f_a_direct(z1: C64, z2: C64, t: C64, s1: C64, s2: C64, sb: C64) -> C64 {
    let den = (1.0 - z1) * (1.0 - z2);
    let t2 = t * t;
    let s = s1 * s2;
    let f1 = t2 * (2.0 * t2 - t * sb - t2 * t / sb);
    let f21 = 2.0 * t2 * (s * (t2 + 1.0 + s) - t * (t2 + 1.0) * (s1 + s2)) / den;
    let f22 = -(2.0 * t2 + 1.0).powi(2) * s * (s1 + s2) / (2.0 * sb * den);
    let f23 = t * (2.0 * t2 + 1.0) * (t2 + 1.0) * (3.0 * t2 + z1 + z2 + s) / (2.0 * sb * den);
    let f24 = -t * (2.0 * t2 + 1.0) * s * (s - t2) / (2.0 * sb * den);
    f1 + f21 + f22 + f23 + f24
}

/// `F_a` from the Laurent series in `1/t^2`, accurate to ~1e-16 for `|t| >= 8`.
pub fn f_a_tail(z1: C64, z2: C64, t: C64) -> C64 {
    let u2 = (t * t).inv();
    let max_deg = TAIL.iter().map(|e| e.1.max(e.2)).max().unwrap_or(0) as usize;
    let mut p1 = vec![C64::new(1.0, 0.0); max_deg + 1];
    let mut p2 = p1.clone();
    for k in 1..=max_deg {
        p1[k] = p1[k - 1] * z1;
        p2[k] = p2[k - 1] * z2;
    }
    let max_pow = TAIL.iter().map(|e| e.0).max().unwrap_or(0);
    let mut coef = vec![C64::new(0.0, 0.0); max_pow + 1];
    for &(m, i, j, c) in TAIL {
        coef[m] += c * p1[i as usize] * p2[j as usize];
    }
    let mut acc = C64::new(0.0, 0.0);
    for c in coef.iter().rev() {
        acc = acc * u2 + c;
    }
    acc / ((1.0 - z1) * (1.0 - z2))
}

/// Normalised pressure denominator `F_a(lambda, t)` for complex `t`.
pub fn f_a(params: &ModelParams, lambda: C64, t: C64) -> C64 {
    let w2 = lambda + params.a;
    let (z1, z2) = characteristic_roots(params, lambda);
    let (z1, z2) = (z1 / w2, z2 / w2);
    if t.norm() >= TAIL_SWITCH {
        return f_a_tail(z1, z2, t);
    }
    let t2 = t * t;
    f_a_direct(z1, z2, t, (t2 + z1).sqrt(), (t2 + z2).sqrt(), (1.0 + t2).sqrt())
}

/// Normalised velocity denominator `G_a(lambda, t) = A_a / (lambda + a)^2`.
pub fn g_a(params: &ModelParams, lambda: C64, t: C64) -> C64 {
    let w2 = lambda + params.a;
    let (z1, z2) = characteristic_roots(params, lambda);
    g_a_normalized(z1 / w2, z2 / w2, t)
}

/// `G_a` in normalised variables. For `|t| >= 1` the leading `t^4` terms are
/// cancelled analytically so that `G_a ~ 2 t^2` keeps full relative accuracy.
pub fn g_a_normalized(z1: C64, z2: C64, t: C64) -> C64 {
    let t2 = t * t;
    let (s1, s2, sb) = ((t2 + z1).sqrt(), (t2 + z2).sqrt(), (1.0 + t2).sqrt());
    let sb2 = 1.0 + t2;
    if t.norm() < 1.0 {
        return sb2 * sb * (s1 + s2) - t2 * sb2 - t2 * s1 * s2;
    }
    let y = |z: C64, s: C64| (t2 * (1.0 + z) + z) / (sb * s + t2);
    let w = (1.0 + t2 * (2.0 - z1 - z2) - z1 * z2) / (sb2 + s1 * s2);
    sb2 * (y(z1, s1) + y(z2, s2)) + t2 * w
}

/// Large-`|lambda|` limit of `F_a` at `t -> infinity`: `-z1 z2 / (2 (1 - z1)(1 - z2))`.
pub fn f_a_limit(z1: C64, z2: C64) -> C64 {
    -z1 * z2 / (2.0 * (1.0 - z1) * (1.0 - z2))
}

/// Coefficient of `i xi'.h'` in the data term of the pressure formula.
///
/// It is the divided difference in `L` of `L brace(L) / (B^2 - L^2)`,
/// expanded by the product rule so that it neither divides by `L2 - L1`
/// nor cancels between terms of size `|xi'|^6` at large `|xi'|`.
pub fn hbar_coeff(params: &ModelParams, mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let (a, b, l1, l2) = (p.a, p.b, p.l1, p.l2);
    let a2 = a * a;
    let w2 = mode.lambda + mode.a;
    // B^2 - A^2 = lambda + a and L_j^2 - A^2 = z_j, so every difference
    // below is a ratio of O(1) quantities.
    let brace = |l: C64, z: C64, d: C64| {
        let inner = z * (d / (b + l) + w2 / (b + a)) / (l + a) - w2 * w2 / ((b + a) * (b + a));
        (2.0 * a2 * inner - w2 * z) / (2.0 * b)
    };
    let brace1 = brace(l1, mode.z1, p.d1);
    let brace2 = brace(l2, mode.z2, p.d2);
    // Divided difference of brace: 2A^2 - (B^2 + A^2)(L1 + L2) / (2B).
    let brace_dd = (a2 * (p.d1 / (b + l1) + p.d2 / (b + l2)) - w2 * (l1 + l2) / 2.0) / b;
    let dd = l1 * brace1 * (l1 + l2) / (p.d1 * p.d2) + (brace2 + l1 * brace_dd) / p.d2;
    -params.beta * dd
}

/// The same coefficient as a symmetric rational function; exact, but it
/// cancels badly once `|xi'|^2` dominates `|lambda|`.
pub fn hbar_coeff_symmetric(params: &ModelParams, mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let (a, b, l1, l2) = (p.a, p.b, p.l1, p.l2);
    let beta = params.beta;
    let (a2, b2) = (a * a, b * b);
    -2.0 * beta * a2 * b2 * (l1 + l2) / (p.d1 * p.d2)
        + beta * (b2 + a2) * (b2 * (l1 * l1 + l1 * l2 + l2 * l2) + a2 * b2 - l1 * l1 * l2 * l2 + a2 * l1 * l2)
            / (2.0 * b * p.d1 * p.d2)
}

/// The same coefficient through the divided difference.
pub fn hbar_coeff_naive(params: &ModelParams, mode: &ModeContext) -> C64 {
    let p = pieces(mode);
    let beta = params.beta;
    (beta * p.l1 / p.d1 * brace(&p, p.l1) - beta * p.l2 / p.d2 * brace(&p, p.l2)) / (p.l2 - p.l1)
}

/// `i xi'.h'`.
pub fn tangential_divergence(xi: &[f64], h: &Vec3) -> C64 {
    xi.iter().enumerate().map(|(j, x)| I * *x * h[j]).sum()
}

/// Data term built from the Neumann data of `Q`.
pub fn h1_term(mode: &ModeContext, hq: &Mat3) -> C64 {
    let n = mode.dim - 1;
    let xi = &mode.xi_prime;
    let a2 = mode.a_abs * mode.a_abs;
    let b = mode.b_a;
    let mut s = a2 * hq[n][n];
    for j in 0..n {
        s -= (b * b + a2) / b * I * xi[j] * hq[j][n];
        for k in 0..n {
            s += (I * xi[j]) * (I * xi[k]) * hq[j][k];
        }
    }
    s
}

/// Closed-form pressure amplitude `C = (hbar + H1) / (A cal_C)`, defined for `A > 0`.
pub fn pressure_amplitude_closed_form(params: &ModelParams, mode: &ModeContext, h: &Vec3, hq: &Mat3) -> Result<C64> {
    if mode.a_abs == 0.0 {
        return Err(Error::InvalidInput("closed-form pressure amplitude needs xi' != 0".into()));
    }
    let cal_c = eval_cal_c(params, mode)?;
    let rhs = hbar_coeff(params, mode) * tangential_divergence(&mode.xi_prime, h) + h1_term(mode, hq);
    Ok(rhs / (mode.a_abs * cal_c))
}

/// All scalar functions of a mode, as one record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarFunctions {
    pub cal_c: C64,
    pub cal_a: C64,
    pub f_a: C64,
    pub g_a: C64,
    pub i1: C64,
    pub i2_over_diff: C64,
    pub hbar_coeff: C64,
}

pub fn scalar_functions(params: &ModelParams, mode: &ModeContext) -> Result<ScalarFunctions> {
    let cal_c = eval_cal_c(params, mode)?;
    let w2 = mode.lambda + params.a;
    let cal_a = eval_cal_a(mode);
    Ok(ScalarFunctions {
        cal_c,
        cal_a,
        f_a: f_a_mode(params, mode),
        g_a: cal_a / (w2 * w2),
        i1: i1(params, mode),
        i2_over_diff: i2_over_diff(params, mode),
        hbar_coeff: hbar_coeff(params, mode),
    })
}

/// Determinant of the reduced `(2N-1) x (2N-1)` system for the tangential
/// amplitudes and `C`, by elimination and by the factored formula.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeterminantCheck {
    pub det_direct: C64,
    pub det_formula: C64,
    /// Identity linking the bracket of the formula to `-(beta A / B) (I1 + I2/(L2-L1))`.
    pub bracket_identity: C64,
}

pub fn determinant_check(params: &ModelParams, mode: &ModeContext) -> DeterminantCheck {
    let p = pieces(mode);
    let (a, b, l1, l2) = (p.a, p.b, p.l1, p.l2);
    let lam = mode.lambda;
    let beta = params.beta;
    let b2 = beta * beta;
    let a1 = lam * b2 * l1 * (a * a - b * l1) / (2.0 * b * p.d1);
    let a2 = lam * b2 * l2 * (a * a - b * l2) / (2.0 * b * p.d2);
    let ac = a * b2 / (b * b)
        * (a * (b - a) * (b - a) / (b * b - a * a)
            + l2 * (a * a + l2 * l2 - 3.0 * b * l2 + b * b) * (l1 - a) / (2.0 * p.d2 * (l2 - l1))
            - l1 * (a * a + l1 * l1 - 3.0 * b * l1 + b * b) * (l2 - a) / (2.0 * p.d1 * (l2 - l1)));
    let cap = l1 * a * (l2 - a) / (lam * (l2 - l1));
    let n = mode.dim - 1;
    let m = 2 * n + 1;
    let mut mat = nalgebra::DMatrix::<C64>::zeros(m, m);
    for j in 0..n {
        let ix = I * mode.xi_prime[j];
        mat[(j, j)] = a1;
        mat[(j, n + j)] = a2;
        mat[(j, 2 * n)] = ix * ac;
        mat[(n, j)] = ix;
        mat[(n + 1 + j, j)] = C64::new(1.0, 0.0);
        mat[(n + 1 + j, n + j)] = C64::new(1.0, 0.0);
        mat[(n + 1 + j, 2 * n)] = -ix / lam;
    }
    mat[(n, 2 * n)] = cap;
    let det_direct = mat.determinant();
    let bracket = a * a * (a2 / lam + ac) + cap * (a1 - a2);
    let sign = if (mode.dim - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let det_formula = sign * (a1 - a2).powi(mode.dim as i32 - 2) * bracket;
    let bracket_identity = bracket / (-beta * a / b * (i1(params, mode) + i2(params, mode) / (l2 - l1)));
    DeterminantCheck { det_direct, det_formula, bracket_identity }
}
