//! Browser bindings: characteristic roots along a ray, one mode profile and
//! a map of the normalised denominators over the sector.
//!
//! Every binding returns a JSON string; the `*_json` functions do the work
//! and are plain Rust so they can be tested natively.

use halfspace::assembly::{solve_mode, BoundaryModeData};
use halfspace::profile::eval_profile;
use halfspace::scalars::{f_a, g_a};
use halfspace::symbols::{characteristic_roots, ModeContext};
use halfspace::verify::t_on_ray;
use halfspace::{ModelParams, C64};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn params(a: f64, beta: f64) -> Result<ModelParams, String> {
    let p = ModelParams::new(a, beta, 2);
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Roots `z_1, z_2` and decay rates `Re L_j` at `xi' = 1` for `count`
/// points `|lambda|` in `[r_min, r_max]` on the ray at angle `angle`.
pub fn roots_along_ray_json(
    a: f64,
    beta: f64,
    angle: f64,
    r_min: f64,
    r_max: f64,
    count: usize,
) -> Result<String, String> {
    let p = params(a, beta)?;
    if !(r_min > 0.0 && r_max > r_min) {
        return Err("need 0 < r_min < r_max".into());
    }
    let rows: Vec<_> = log_space(r_min, r_max, count)
        .into_iter()
        .map(|r| {
            let lambda = C64::from_polar(r, angle);
            let (z1, z2) = characteristic_roots(&p, lambda);
            let decay = ModeContext::new(&p, lambda, &[1.0]).ok().map(|m| [m.l1.re, m.l2.re]);
            json!({ "abs_lambda": r, "z1": [z1.re, z1.im], "z2": [z2.re, z2.im], "decay": decay })
        })
        .collect();
    Ok(json!({ "rows": rows }).to_string())
}

/// Profile of the mode driven by a unit `H_NN` trace, on `points` uniform
/// points in `[0, x_max]`: real parts of `u_1, u_2, Q_11, Q_12`.
pub fn mode_profile_json(
    a: f64,
    beta: f64,
    re: f64,
    im: f64,
    xi: f64,
    x_max: f64,
    points: usize,
) -> Result<String, String> {
    let p = params(a, beta)?;
    let mut data = BoundaryModeData::zero();
    data.hq[1][1] = C64::new(1.0, 0.0);
    let sol = solve_mode(&p, C64::new(re, im), &[xi], &data).map_err(|e| e.to_string())?;
    let prof = eval_profile(&sol);
    let n = points.max(2);
    let rows: Vec<_> = (0..n)
        .map(|k| {
            let x = x_max * k as f64 / (n - 1) as f64;
            let s = prof.value(x);
            [x, s.u[0].re, s.u[1].re, s.q[0][0].re, s.q[0][1].re]
        })
        .collect();
    Ok(json!({ "columns": ["x", "u1", "u2", "q11", "q12"], "degenerate": sol.mode.degenerate, "rows": rows })
        .to_string())
}

/// `min_t |F_a|` and `min_t |G_a| / (1 + t^2)` over real `|xi'|` for a polar
/// grid of `lambda` in the sector, `|lambda|` in `[r, r_max]`.
pub fn nonvanishing_map_json(a: f64, beta: f64, r_max: f64, n_radius: usize, n_angle: usize) -> Result<String, String> {
    let p = params(a, beta)?;
    let opening = std::f64::consts::PI - p.theta;
    let ts: Vec<f64> = std::iter::once(0.0).chain(log_space(1e-3, 1e3, 48)).collect();
    let radii = log_space(p.r, r_max.max(p.r * 1.01), n_radius.max(2));
    let na = n_angle.max(2);
    let mut cells = Vec::new();
    for &r in &radii {
        for k in 0..na {
            let angle = -opening + 2.0 * opening * k as f64 / (na - 1) as f64;
            let lambda = C64::from_polar(r, angle);
            let (mut mf, mut mg) = (f64::INFINITY, f64::INFINITY);
            for &s in &ts {
                let t = t_on_ray(&p, lambda, s);
                mf = mf.min(f_a(&p, lambda, t).norm());
                mg = mg.min(g_a(&p, lambda, t).norm() / (1.0 + s * s));
            }
            cells.push([r, angle, mf, mg]);
        }
    }
    Ok(json!({ "columns": ["abs_lambda", "angle", "min_f", "min_g"], "cells": cells }).to_string())
}

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn roots_along_ray(a: f64, beta: f64, angle: f64, r_min: f64, r_max: f64, count: usize) -> Result<String, JsValue> {
    to_js(roots_along_ray_json(a, beta, angle, r_min, r_max, count))
}

#[wasm_bindgen]
pub fn mode_profile(
    a: f64,
    beta: f64,
    re: f64,
    im: f64,
    xi: f64,
    x_max: f64,
    points: usize,
) -> Result<String, JsValue> {
    to_js(mode_profile_json(a, beta, re, im, xi, x_max, points))
}

#[wasm_bindgen]
pub fn nonvanishing_map(a: f64, beta: f64, r_max: f64, n_radius: usize, n_angle: usize) -> Result<String, JsValue> {
    to_js(nonvanishing_map_json(a, beta, r_max, n_radius, n_angle))
}
