//! Linear evolution by Laplace-contour inversion and by Crank-Nicolson
//! stepping, discrete maximal-regularity surrogate norms, the nonlinear
//! terms of the full model, and the Picard iteration for the local
//! nonlinear solution.

use std::path::Path;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::assembly::{solve_mode, BoundaryModeData};
use crate::error::{Error, Result};
use crate::field::{fft_axes, lq_norm, point_weights, Differentiator, FieldGrid, GridSpec, NormalSpec};
use crate::oracle::{StretchedGrid, TruncatedBvp};
use crate::params::ModelParams;
use crate::profile::{eval_profile, mode_residual};
use crate::resolvent::{BoundaryFields, InteriorData};
use crate::tensor::{trace, zero_mat, zero_vec, Mat3, Vec3};
use crate::C64;

const Z: C64 = C64 { re: 0.0, im: 0.0 };

/// Time-dependent data of the linear problem.
pub trait EvolutionData: Sync {
    /// Traces `(h, H)` at time `t` on the tangential grid.
    fn boundary(&self, t: f64) -> BoundaryFields;
    /// Interior forcing `(f, G)` at time `t`, if any.
    fn interior(&self, _t: f64) -> Option<InteriorData> {
        None
    }
}

/// Fields on a uniform time grid, with the exponential weight used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub gamma: f64,
    pub fields: Vec<FieldGrid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryManifest {
    schema_version: u32,
    times: Vec<f64>,
    gamma: f64,
    files: Vec<String>,
}

impl Trajectory {
    /// Writes one field file pair per step plus `manifest.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (k, f) in self.fields.iter().enumerate() {
            let name = format!("step_{k:05}");
            f.write(&dir.join(&name))?;
            files.push(name);
        }
        let m = TrajectoryManifest {
            schema_version: crate::SCHEMA_VERSION,
            times: self.times.clone(),
            gamma: self.gamma,
            files,
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let m: TrajectoryManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let fields = m.files.iter().map(|f| FieldGrid::read(&dir.join(f))).collect::<Result<Vec<_>>>()?;
        Ok(Self { times: m.times, gamma: m.gamma, fields })
    }

    /// Largest difference in `(u, Q)` to `other` at the times both share,
    /// relative to the largest `(u, Q)` of `self`.
    pub fn relative_difference(&self, other: &Trajectory) -> f64 {
        let scale = self.fields.iter().map(|f| f.max_abs_uq()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for (t, f) in self.times.iter().zip(&self.fields) {
            if let Some(j) = other.times.iter().position(|s| (s - t).abs() < 1e-9 * (1.0 + t.abs())) {
                worst = worst.max(f.max_diff_uq(&other.fields[j]));
            }
        }
        worst / scale
    }
}

/// Diagnostics of a Laplace-contour solve.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LaplaceReport {
    /// Largest normalised residual of the mode systems over all sampled
    /// time frequencies; the time derivative is exact in the transform.
    pub max_residual: f64,
    pub frequencies: usize,
    pub active_modes: usize,
}

fn tangential_transform(spec: &GridSpec, comps: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let axes: Vec<usize> = (0..spec.dim - 1).collect();
    comps
        .iter()
        .map(|c| {
            let mut d = c.clone();
            fft_axes(&mut d, &spec.counts, &axes, true);
            d
        })
        .collect()
}

/// Solves the boundary-driven linear problem (`f = G = 0`, zero initial
/// data) on `n_t` uniform times in `[0, t_end)`: discrete Fourier transform
/// in time of the weighted data `e^{-gamma t} (h, H)` on a window padded to
/// twice the length, one resolvent solve per time frequency at
/// `lambda = gamma + i tau`, inverse transform and reweighting. Data should
/// be negligible near `t = 0` and `t = t_end`.
pub fn laplace_contour_solve(
    params: &ModelParams,
    spec: &GridSpec,
    data: &dyn EvolutionData,
    t_end: f64,
    n_t: usize,
    gamma: f64,
) -> Result<(Trajectory, LaplaceReport)> {
    spec.validate()?;
    if !(gamma > params.r) {
        return Err(Error::ContourTooLow { lambda: format!("{gamma}") });
    }
    if data.interior(0.0).is_some() {
        return Err(Error::InvalidInput("the contour path handles boundary-driven data only".into()));
    }
    let n = spec.dim;
    let nt = spec.n_tan();
    let dt = t_end / n_t as f64;
    let m_len = 2 * n_t;
    let ncomp = n + n * n;
    // weighted boundary data in tangential frequency space: [k][comp][t]
    let samples: Vec<Vec<Vec<C64>>> = (0..n_t)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * dt;
            let b = data.boundary(t);
            let w = (-gamma * t).exp();
            let mut comps: Vec<Vec<C64>> = b.h.into_iter().chain(b.hq).collect();
            comps.iter_mut().for_each(|c| c.iter_mut().for_each(|z| *z *= w));
            tangential_transform(spec, &comps)
        })
        .collect();
    let scale = samples.iter().flatten().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let active: Vec<usize> = (0..nt)
        .filter(|&t| spec.tangential_frequency(t).is_some())
        .filter(|&t| samples.iter().any(|s| s.iter().any(|c| c[t].norm() > 1e-14 * scale)))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m_len);
    let inv = planner.plan_fft_inverse(m_len);
    // time transform per (active mode, component)
    let spectra: Vec<Vec<Vec<C64>>> = active
        .iter()
        .map(|&t| {
            (0..ncomp)
                .map(|c| {
                    let mut line = vec![Z; m_len];
                    for k in 0..n_t {
                        line[k] = samples[k][c][t];
                    }
                    fwd.process(&mut line);
                    line
                })
                .collect()
        })
        .collect();
    let x = spec.normal.points();
    let nz = x.len();
    let nfield = n + 1 + n * n;
    let tau = |m: usize| {
        let s = if m <= m_len / 2 { m as f64 } else { m as f64 - m_len as f64 };
        2.0 * std::f64::consts::PI * s / (m_len as f64 * dt)
    };
    // per frequency: [active][node][field component], plus the residual
    let per_freq: Vec<(Vec<Vec<Vec<C64>>>, f64)> = (0..m_len)
        .into_par_iter()
        .map(|m| {
            let empty = vec![vec![vec![Z; nfield]; nz]; active.len()];
            if m == m_len / 2 {
                return Ok((empty, 0.0));
            }
            let lambda = C64::new(gamma, tau(m));
            let mut out = empty;
            let mut worst: f64 = 0.0;
            for (a, &t) in active.iter().enumerate() {
                let xi = spec.tangential_frequency(t).unwrap();
                let mut d = BoundaryModeData::zero();
                for j in 0..n {
                    d.h[j] = spectra[a][j][m];
                    for k in 0..n {
                        d.hq[j][k] = spectra[a][n + j * n + k][m];
                    }
                }
                if d.norm(n) == 0.0 {
                    continue;
                }
                d.h[n - 1] = Z;
                let sol = solve_mode(params, lambda, &xi, &d)?;
                let prof = eval_profile(&sol);
                worst = worst.max(mode_residual(params, &sol.mode, &d, &prof, &x).max());
                for (k, &xx) in x.iter().enumerate() {
                    let s = prof.value(xx);
                    let v = &mut out[a][k];
                    for j in 0..n {
                        v[j] = s.u[j];
                        for l in 0..n {
                            v[n + 1 + j * n + l] = s.q[j][l];
                        }
                    }
                    v[n] = s.p;
                }
            }
            Ok((out, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = per_freq.iter().map(|p| p.1).fold(0.0, f64::max);
    // inverse time transform: [active][node][comp] -> series over k
    let mut modal = vec![vec![vec![vec![Z; nfield]; nz]; active.len()]; n_t];
    for a in 0..active.len() {
        for k in 0..nz {
            for c in 0..nfield {
                let mut line: Vec<C64> = (0..m_len).map(|m| per_freq[m].0[a][k][c]).collect();
                inv.process(&mut line);
                for (kt, slot) in modal.iter_mut().enumerate() {
                    let t = kt as f64 * dt;
                    slot[a][k][c] = line[kt] * ((gamma * t).exp() / m_len as f64);
                }
            }
        }
    }
    let fields: Vec<FieldGrid> = modal
        .par_iter()
        .map(|slot| {
            let mut comps = vec![vec![Z; spec.n_points()]; nfield];
            for (a, &t) in active.iter().enumerate() {
                for k in 0..nz {
                    for c in 0..nfield {
                        comps[c][t * nz + k] = slot[a][k][c];
                    }
                }
            }
            synthesize_field(spec, comps)
        })
        .collect();
    let times = (0..n_t).map(|k| k as f64 * dt).collect();
    Ok((
        Trajectory { times, gamma, fields },
        LaplaceReport { max_residual, frequencies: m_len, active_modes: active.len() },
    ))
}

/// Inverse tangential transform of mode-space components
/// `u_1..u_N, p, Q` into a field.
fn synthesize_field(spec: &GridSpec, mut comps: Vec<Vec<C64>>) -> FieldGrid {
    let n = spec.dim;
    let shape: Vec<usize> = spec.counts.iter().copied().chain(std::iter::once(spec.n_normal())).collect();
    let axes: Vec<usize> = (0..n - 1).collect();
    for c in comps.iter_mut() {
        fft_axes(c, &shape, &axes, false);
    }
    let mut f = FieldGrid::zeros(spec);
    let mut it = comps.into_iter();
    for j in 0..n {
        f.u[j] = it.next().unwrap();
    }
    f.p = it.next().unwrap();
    for j in 0..n * n {
        f.q[j] = it.next().unwrap();
    }
    f
}

fn stretched(spec: &GridSpec) -> Result<StretchedGrid> {
    match spec.normal {
        NormalSpec::Stretched { n, x_max, stretch } => Ok(StretchedGrid { x_max, n, stretch }),
        _ => Err(Error::InvalidInput("time stepping needs a stretched normal grid".into())),
    }
}

/// Mode-space state: `[mode][comp][node]`, components `u_1..u_N, Q`.
type ModalState = Vec<Vec<Vec<C64>>>;
/// New midpoint-state columns of one mode and its pressure.
type ModeHistory = (Vec<Vec<C64>>, Vec<C64>);

fn to_modal(spec: &GridSpec, comps: &[&Vec<C64>]) -> ModalState {
    let nz = spec.n_normal();
    let shape: Vec<usize> = spec.counts.iter().copied().chain(std::iter::once(nz)).collect();
    let axes: Vec<usize> = (0..spec.dim - 1).collect();
    let hats: Vec<Vec<C64>> = comps
        .iter()
        .map(|c| {
            let mut d = (*c).clone();
            fft_axes(&mut d, &shape, &axes, true);
            d
        })
        .collect();
    (0..spec.n_tan()).map(|t| hats.iter().map(|h| h[t * nz..(t + 1) * nz].to_vec()).collect()).collect()
}

/// Crank-Nicolson in time with step `t_end / n_steps`. Each step solves
/// the resolvent problem at `lambda = 2 / dt` for the midpoint state
/// `w = (u^{n+1} + u^n) / 2`, one tangential mode at a time with the
/// finite-difference mode discretisation on the grid's stretched normal
/// nodes, and sets `u^{n+1} = 2 w - u^n`. Every `output_every`-th step is
/// kept. The pressure stored with a step is that of the preceding midpoint.
pub fn time_step_solve(
    params: &ModelParams,
    spec: &GridSpec,
    data: &dyn EvolutionData,
    initial: Option<&FieldGrid>,
    t_end: f64,
    n_steps: usize,
    output_every: usize,
) -> Result<Trajectory> {
    spec.validate()?;
    let grid = stretched(spec)?;
    let n = spec.dim;
    let nz = spec.n_normal();
    let dt = t_end / n_steps as f64;
    let lambda = C64::new(2.0 / dt, 0.0);
    let nt = spec.n_tan();
    let ops: Vec<Option<TruncatedBvp>> = (0..nt)
        .into_par_iter()
        .map(|t| match spec.tangential_frequency(t) {
            Some(xi) => TruncatedBvp::new(params, lambda, &xi, grid).map(Some),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let zero_field = FieldGrid::zeros(spec);
    let init = initial.unwrap_or(&zero_field);
    let comps: Vec<&Vec<C64>> = init.u.iter().chain(init.q.iter()).collect();
    let mut state: ModalState = to_modal(spec, &comps);
    let mut pressure: Vec<Vec<C64>> = vec![vec![Z; nz]; nt];
    let boundary_modal = |t: f64| -> Vec<Vec<C64>> {
        let b = data.boundary(t);
        let comps: Vec<Vec<C64>> = b.h.into_iter().chain(b.hq).collect();
        tangential_transform(spec, &comps)
    };
    let interior_modal = |t: f64| -> Option<ModalState> {
        data.interior(t).map(|d| {
            let comps: Vec<&Vec<C64>> = d.f.iter().chain(d.g.iter()).collect();
            to_modal(spec, &comps)
        })
    };
    let emit = |state: &ModalState, pressure: &[Vec<C64>]| -> FieldGrid {
        let mut comps = vec![vec![Z; spec.n_points()]; n + 1 + n * n];
        for t in 0..nt {
            for k in 0..nz {
                for j in 0..n {
                    comps[j][t * nz + k] = state[t][j][k];
                }
                comps[n][t * nz + k] = pressure[t][k];
                for c in 0..n * n {
                    comps[n + 1 + c][t * nz + k] = state[t][n + c][k];
                }
            }
        }
        synthesize_field(spec, comps)
    };
    let mut times = vec![0.0];
    let mut fields = vec![emit(&state, &pressure)];
    let mut b_prev = boundary_modal(0.0);
    let mut f_prev = interior_modal(0.0);
    for step in 0..n_steps {
        let t1 = (step + 1) as f64 * dt;
        let b_next = boundary_modal(t1);
        let f_next = interior_modal(t1);
        let mode_size = |t: usize| -> f64 {
            let mut m: f64 = 0.0;
            for c in b_prev.iter().chain(&b_next) {
                m = m.max(c[t].norm());
            }
            for c in &state[t] {
                m = m.max(c.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            for src in [&f_prev, &f_next].into_iter().flatten() {
                for c in &src[t] {
                    m = m.max(c.iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
            m
        };
        let sizes: Vec<f64> = (0..nt).into_par_iter().map(mode_size).collect();
        // modes at round-off level of the largest one carry no information
        let floor = 1e-15 * sizes.iter().copied().fold(0.0, f64::max);
        let results: Vec<Option<ModeHistory>> = (0..nt)
            .into_par_iter()
            .map(|t| {
                let op = ops[t].as_ref()?;
                let h: Vec<C64> = (0..n).map(|j| 0.5 * (b_prev[j][t] + b_next[j][t])).collect();
                let hq: Vec<C64> = (0..n * n).map(|c| 0.5 * (b_prev[n + c][t] + b_next[n + c][t])).collect();
                let cur = &state[t];
                if sizes[t] <= floor {
                    return None;
                }
                let mut f = vec![vec![Z; n]; nz];
                let mut g = vec![vec![Z; n * n]; nz];
                for k in 0..nz {
                    for j in 0..n {
                        f[k][j] = lambda * cur[j][k];
                    }
                    for c in 0..n * n {
                        g[k][c] = lambda * cur[n + c][k];
                    }
                }
                for src in [&f_prev, &f_next].into_iter().flatten() {
                    for k in 0..nz {
                        for j in 0..n {
                            f[k][j] += 0.5 * src[t][j][k];
                        }
                        for c in 0..n * n {
                            g[k][c] += 0.5 * src[t][n + c][k];
                        }
                    }
                }
                let w = op.solve(&h, &hq, Some(&f), Some(&g));
                let mut next = vec![vec![Z; nz]; n + n * n];
                for k in 0..nz {
                    for j in 0..n {
                        next[j][k] = 2.0 * w.u[k][j] - cur[j][k];
                    }
                    for c in 0..n * n {
                        next[n + c][k] = 2.0 * w.q[k][c] - cur[n + c][k];
                    }
                }
                Some((next, w.p_nodes()))
            })
            .collect();
        for (t, r) in results.into_iter().enumerate() {
            match r {
                Some((next, p)) => {
                    state[t] = next;
                    pressure[t] = p;
                }
                None if sizes[t] > 0.0 => {
                    state[t].iter_mut().for_each(|c| c.fill(Z));
                    pressure[t].fill(Z);
                }
                None => {}
            }
        }
        b_prev = b_next;
        f_prev = f_next;
        if (step + 1) % output_every.max(1) == 0 {
            times.push(t1);
            fields.push(emit(&state, &pressure));
        }
    }
    Ok(Trajectory { times, gamma: 0.0, fields })
}

/// Components of the discrete maximal-regularity surrogate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxRegReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub terms: Vec<(String, f64)>,
}

/// Applies `|lambda|^{k/2}`, `lambda = gamma + i tau`, in time to a series
/// of already weighted values sampled every `dt` (zero padded to twice the
/// length).
fn half_derivative_series(series: &[C64], dt: f64, gamma: f64, k: f64) -> Vec<C64> {
    let n = series.len();
    let m = 2 * n;
    let mut planner = FftPlanner::<f64>::new();
    let mut line = vec![Z; m];
    line[..n].copy_from_slice(series);
    planner.plan_fft_forward(m).process(&mut line);
    for (i, z) in line.iter_mut().enumerate() {
        let s = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
        let tau = 2.0 * std::f64::consts::PI * s / (m as f64 * dt);
        *z *= C64::new(gamma, tau).norm().powf(k / 2.0) / m as f64;
    }
    planner.plan_fft_inverse(m).process(&mut line);
    line.truncate(n);
    line
}

/// Weighted space-time norm `||e^{-gamma t} |lambda|^{k/2} D v||_{L^p(L^q)}`
/// of a family of spatial-derivative fields sampled in time.
fn spacetime_norm(series: &[Vec<Vec<C64>>], times: &[f64], gamma: f64, k: f64, weights: &[f64], p: f64, q: f64) -> f64 {
    let nt = series.len();
    if nt == 0 {
        return 0.0;
    }
    let dt = if nt > 1 { times[1] - times[0] } else { 1.0 };
    let ncomp = series[0].len();
    let npts = weights.len();
    // weight, then apply the time multiplier point by point
    let mut weighted: Vec<Vec<Vec<C64>>> = series
        .iter()
        .zip(times)
        .map(|(s, t)| s.iter().map(|c| c.iter().map(|z| z * (-gamma * t).exp()).collect()).collect())
        .collect();
    if k != 0.0 {
        let cols: Vec<Vec<Vec<C64>>> = (0..ncomp)
            .into_par_iter()
            .map(|c| {
                (0..npts)
                    .map(|i| {
                        let line: Vec<C64> = (0..nt).map(|kt| weighted[kt][c][i]).collect();
                        half_derivative_series(&line, dt, gamma, k)
                    })
                    .collect()
            })
            .collect();
        for kt in 0..nt {
            for c in 0..ncomp {
                for i in 0..npts {
                    weighted[kt][c][i] = cols[c][i][kt];
                }
            }
        }
    }
    let mut s = 0.0;
    for slot in &weighted {
        let refs: Vec<&[C64]> = slot.iter().map(|c| c.as_slice()).collect();
        s += dt * lq_norm(&refs, weights, q).powf(p);
    }
    s.powf(1.0 / p)
}

/// All spatial derivatives of exact order `k` of the listed components.
fn derivatives_of(d: &Differentiator, comps: &[&Vec<C64>], k: usize) -> Vec<Vec<C64>> {
    comps.iter().flat_map(|c| d.all_of_order(c, k)).collect()
}

/// Extends boundary fields into the half-space as `v(x') e^{-x_N}`.
fn extend_boundary(spec: &GridSpec, b: &BoundaryFields) -> Vec<Vec<C64>> {
    let x = spec.normal.points();
    let nz = x.len();
    b.h.iter().chain(&b.hq).map(|c| (0..spec.n_points()).map(|i| c[i / nz] * (-x[i % nz]).exp()).collect()).collect()
}

/// Discrete surrogate of the maximal-regularity estimate on a uniform time
/// grid. Left side:
/// `sum_l ||e^{-gt} u||_{H^{l/2}(W^{2-l})} + sum_l ||e^{-gt} Q||_{H^{l/2}(W^{3-l})} + ||e^{-gt} grad p||`,
/// with `H^{l/2}` realised by the `|lambda|^{l/2}` time multiplier and
/// `W^{m}` by the order-`m` derivatives (lower orders are dominated on the
/// sector). Right side: the same for `(h, H)` extended by `e^{-x_N}`, plus
/// `||e^{-gt} f||`, `||e^{-gt} G||_{W^1}` and Sobolev surrogates
/// `||u_0||_{W^2} + ||Q_0||_{W^3}` of the initial-data norms.
pub fn maxreg_norms(traj: &Trajectory, params: &ModelParams, data: &dyn EvolutionData, gamma: f64) -> MaxRegReport {
    let spec = &traj.fields[0].spec;
    let d = Differentiator::new(spec);
    let w = point_weights(spec);
    let (p, q) = (params.p, params.q);
    let times = &traj.times;
    let mut terms = Vec::new();
    let push = |name: &str, v: f64, terms: &mut Vec<(String, f64)>| {
        terms.push((name.to_string(), v));
        v
    };
    let u_of = |f: &FieldGrid, k: usize| derivatives_of(&d, &f.u.iter().collect::<Vec<_>>(), k);
    let q_of = |f: &FieldGrid, k: usize| derivatives_of(&d, &f.q.iter().collect::<Vec<_>>(), k);
    let mut lhs = 0.0;
    for l in 0..=2usize {
        let s: Vec<Vec<Vec<C64>>> = traj.fields.par_iter().map(|f| u_of(f, 2 - l)).collect();
        lhs += push(&format!("u:l={l}"), spacetime_norm(&s, times, gamma, l as f64, &w, p, q), &mut terms);
        let s: Vec<Vec<Vec<C64>>> = traj.fields.par_iter().map(|f| q_of(f, 3 - l)).collect();
        lhs += push(&format!("Q:l={l}"), spacetime_norm(&s, times, gamma, l as f64, &w, p, q), &mut terms);
    }
    let s: Vec<Vec<Vec<C64>>> = traj.fields.par_iter().map(|f| d.all_of_order(&f.p, 1)).collect();
    lhs += push("grad p", spacetime_norm(&s, times, gamma, 0.0, &w, p, q), &mut terms);
    let mut rhs = 0.0;
    let ext: Vec<Vec<Vec<C64>>> = times.par_iter().map(|t| extend_boundary(spec, &data.boundary(*t))).collect();
    for l in 0..=2usize {
        let s: Vec<Vec<Vec<C64>>> =
            ext.par_iter().map(|e| derivatives_of(&d, &e.iter().collect::<Vec<_>>(), 2 - l)).collect();
        rhs += push(&format!("(h,H):l={l}"), spacetime_norm(&s, times, gamma, l as f64, &w, p, q), &mut terms);
    }
    let forcing: Vec<Option<InteriorData>> = times.iter().map(|t| data.interior(*t)).collect();
    if forcing.iter().any(|f| f.is_some()) {
        let zero = InteriorData::zeros(spec);
        let s: Vec<Vec<Vec<C64>>> = forcing.iter().map(|f| f.as_ref().unwrap_or(&zero).f.clone()).collect();
        rhs += push("f", spacetime_norm(&s, times, gamma, 0.0, &w, p, q), &mut terms);
        for k in 0..=1 {
            let s: Vec<Vec<Vec<C64>>> = forcing
                .par_iter()
                .map(|f| derivatives_of(&d, &f.as_ref().unwrap_or(&zero).g.iter().collect::<Vec<_>>(), k))
                .collect();
            rhs += push(&format!("G:W{k}"), spacetime_norm(&s, times, gamma, 0.0, &w, p, q), &mut terms);
        }
    }
    let init = initial_data_norm(&traj.fields[0], q);
    rhs += push("initial", init, &mut terms);
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::NAN };
    MaxRegReport { lhs, rhs, ratio, terms }
}

/// Parameters of the nonlinear terms; `beta = 2 xi / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityParams {
    pub xi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub dim: usize,
}

impl NonlinearityParams {
    pub fn from_model(p: &ModelParams) -> Self {
        Self { xi: p.xi(), a: p.a, b: p.b, c: p.c, dim: p.dim }
    }

    pub fn beta(&self) -> f64 {
        2.0 * self.xi / self.dim as f64
    }
}

type Mat = Mat3;

fn mat_mul(a: &Mat, b: &Mat, n: usize) -> Mat {
    let mut m = zero_mat();
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn frob(a: &Mat, b: &Mat, n: usize) -> C64 {
    (0..n).flat_map(|i| (0..n).map(move |j| a[i][j] * b[i][j])).sum()
}

fn deviatoric(a: &Mat, n: usize) -> Mat {
    let tr = trace(a, n) / n as f64;
    let mut m = *a;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] -= tr;
    }
    m
}

fn build(n: usize, f: impl Fn(usize, usize) -> C64) -> Mat {
    let mut m = zero_mat();
    for (i, row) in m.iter_mut().enumerate().take(n) {
        for (j, v) in row.iter_mut().enumerate().take(n) {
            *v = f(i, j);
        }
    }
    m
}

/// Nonlinear terms `(f(u, Q), G(u, Q))` of the full model, with
/// `(grad u)_{jk} = d_k u_j`, `D = sym grad u`, `W = skew grad u`,
/// `H = Lap Q - a Q + b L[Q^2] - c |Q|^2 Q`, `F(Q) = b Q^2 - c |Q|^2 Q`,
/// `L[A] = A - tr(A) Id / N` and `(Div A)_j = sum_k d_k A_jk`.
pub fn nonlinearity_eval(field: &FieldGrid, nl: &NonlinearityParams) -> InteriorData {
    let spec = &field.spec;
    let n = spec.dim;
    let d = Differentiator::new(spec);
    let np = spec.n_points();
    let xi = nl.xi;
    let beta = nl.beta();
    // grad u[j][k] = d_k u_j, grad Q[a][k] = d_k Q_a, Lap Q
    let gu: Vec<Vec<Vec<C64>>> = field.u.iter().map(|c| (0..n).map(|k| d.d1(c, k)).collect()).collect();
    let gq: Vec<Vec<Vec<C64>>> = field.q.iter().map(|c| (0..n).map(|k| d.d1(c, k)).collect()).collect();
    let lapq: Vec<Vec<C64>> = field
        .q
        .iter()
        .map(|c| {
            let mut s = vec![Z; np];
            for k in 0..n {
                for (x, y) in s.iter_mut().zip(d.d2(c, k, k)) {
                    *x += y;
                }
            }
            s
        })
        .collect();
    let at = |c: &Vec<Vec<C64>>, i: usize| build(n, |j, k| c[j * n + k][i]);
    // pointwise pieces: stress tensor (divergence taken afterwards), G and the convective part of f
    let per: Vec<(Mat, Mat, Vec3)> = (0..np)
        .into_par_iter()
        .map(|i| {
            let q = at(&field.q, i);
            let lq = at(&lapq, i);
            let q2 = mat_mul(&q, &q, n);
            let qn2 = frob(&q, &q, n);
            let fq = build(n, |j, k| nl.b * q2[j][k] - nl.c * qn2 * q[j][k]);
            let lq2 = deviatoric(&q2, n);
            let hh = build(n, |j, k| lq[j][k] - nl.a * q[j][k] + nl.b * lq2[j][k] - nl.c * qn2 * q[j][k]);
            let grad_u = build(n, |j, k| gu[j][k][i]);
            let dd = build(n, |j, k| 0.5 * (grad_u[j][k] + grad_u[k][j]));
            let ww = build(n, |j, k| 0.5 * (grad_u[j][k] - grad_u[k][j]));
            let hq = frob(&hh, &q, n);
            let hq_m = mat_mul(&hh, &q, n);
            let qh_m = mat_mul(&q, &hh, n);
            let lfq = deviatoric(&fq, n);
            let stress = build(n, |j, k| {
                let qpi = q[j][k] + if j == k { 1.0 / n as f64 } else { 0.0 };
                let grad_grad: C64 = (0..n * n).map(|a| gq[a][j][i] * gq[a][k][i]).sum();
                2.0 * xi * hq * qpi - (xi + 1.0) * hq_m[j][k] + (1.0 - xi) * qh_m[j][k] - grad_grad - beta * lfq[j][k]
            });
            let mut conv = zero_vec();
            for (j, c) in conv.iter_mut().enumerate().take(n) {
                *c = -(0..n).map(|k| field.u[k][i] * grad_u[j][k]).sum::<C64>();
            }
            let dq = mat_mul(&dd, &q, n);
            let qd = mat_mul(&q, &dd, n);
            let wq = mat_mul(&ww, &q, n);
            let qw = mat_mul(&q, &ww, n);
            let q_grad_u = frob(&q, &grad_u, n);
            let g = build(n, |j, k| {
                let adv: C64 = (0..n).map(|l| field.u[l][i] * gq[j * n + k][l][i]).sum();
                let qpi = q[j][k] + if j == k { 1.0 / n as f64 } else { 0.0 };
                -adv + xi * (dq[j][k] + qd[j][k]) + wq[j][k] - qw[j][k] - 2.0 * xi * qpi * q_grad_u + lfq[j][k]
            });
            (stress, deviatoric(&g, n), conv)
        })
        .collect();
    let mut f = vec![vec![Z; np]; n];
    for j in 0..n {
        for (i, pc) in per.iter().enumerate() {
            f[j][i] = pc.2[j];
        }
        for k in 0..n {
            let s: Vec<C64> = per.iter().map(|pc| pc.0[j][k]).collect();
            for (x, y) in f[j].iter_mut().zip(d.d1(&s, k)) {
                *x += y;
            }
        }
    }
    let g = (0..n * n).map(|c| per.iter().map(|pc| pc.1[c / n][c % n]).collect()).collect();
    InteriorData { f, g }
}

/// Outcome of the Picard iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub schema_version: u32,
    /// `||(u, Q)_{k+1} - (u, Q)_k||_T` per iteration.
    pub differences: Vec<f64>,
    /// Successive ratios of the differences.
    pub ratios: Vec<f64>,
    /// `||(u, Q)_k||_T` per iterate.
    pub norms: Vec<f64>,
    pub contracted: bool,
    pub kappa: f64,
}

/// Surrogate of `||(u, Q)||_T`, the sum
/// `||u||_{W^{1,p}(L^q)} + ||u||_{L^p(W^{2,q})} + ||Q||_{W^{1,p}(W^{1,q})} + ||Q||_{L^p(W^{3,q})}`,
/// with time derivatives by differences of consecutive samples.
pub fn solution_norm(traj: &Trajectory, params: &ModelParams) -> f64 {
    let spec = &traj.fields[0].spec;
    let d = Differentiator::new(spec);
    let w = point_weights(spec);
    let (p, q) = (params.p, params.q);
    let dt = if traj.times.len() > 1 { traj.times[1] - traj.times[0] } else { 1.0 };
    let per_step: Vec<(f64, f64)> = traj
        .fields
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let mut space = 0.0;
            let ucomps: Vec<&Vec<C64>> = f.u.iter().collect();
            let qcomps: Vec<&Vec<C64>> = f.q.iter().collect();
            for order in 0..=2 {
                let s = derivatives_of(&d, &ucomps, order);
                space += lq_norm(&s.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), &w, q);
            }
            for order in 0..=3 {
                let s = derivatives_of(&d, &qcomps, order);
                space += lq_norm(&s.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), &w, q);
            }
            let mut time = 0.0;
            if k > 0 {
                let prev = &traj.fields[k - 1];
                let du: Vec<Vec<C64>> =
                    f.u.iter()
                        .zip(&prev.u)
                        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect())
                        .collect();
                time += lq_norm(&du.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), &w, q);
                let dq: Vec<Vec<C64>> =
                    f.q.iter()
                        .zip(&prev.q)
                        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect())
                        .collect();
                for order in 0..=1 {
                    let s = derivatives_of(&d, &dq.iter().collect::<Vec<_>>(), order);
                    time += lq_norm(&s.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), &w, q);
                }
            }
            (space, time)
        })
        .collect();
    let lp = |v: &mut dyn Iterator<Item = f64>| v.map(|x| dt * x.powf(p)).sum::<f64>().powf(1.0 / p);
    lp(&mut per_step.iter().map(|s| s.0)) + lp(&mut per_step.iter().skip(1).map(|s| s.1))
}

fn trajectory_difference(a: &Trajectory, b: &Trajectory) -> Trajectory {
    let fields = a
        .fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| {
            let mut d = x.clone();
            d.axpy(C64::new(-1.0, 0.0), y);
            d
        })
        .collect();
    Trajectory { times: a.times.clone(), gamma: a.gamma, fields }
}

struct PicardData<'a> {
    boundary: &'a dyn EvolutionData,
    forcing: Vec<InteriorData>,
    dt: f64,
}

impl EvolutionData for PicardData<'_> {
    fn boundary(&self, t: f64) -> BoundaryFields {
        self.boundary.boundary(t)
    }
    fn interior(&self, t: f64) -> Option<InteriorData> {
        let k = ((t / self.dt).round() as usize).min(self.forcing.len() - 1);
        Some(self.forcing[k].clone())
    }
}

/// Relative size below which iterate differences are treated as round-off
/// of the discrete linear solve.
pub const ROUND_OFF_FLOOR: f64 = 1e-10;

/// Consecutive contracting iterations required for success.
pub const MIN_CONTRACTING_RUN: usize = 4;

/// Picard iteration for the nonlinear problem on `(0, T)`: each iterate is
/// the linear Crank-Nicolson solve with the nonlinear terms of the previous
/// iterate as forcing and `(u_0, Q_0)` as initial state. An iteration
/// contracts when its difference ratio is below one or its difference has
/// reached the round-off floor (the fixed point is then resolved to working
/// precision and further ratios are noise). Success needs
/// [`MIN_CONTRACTING_RUN`] consecutive contracting iterations while the
/// iterates stay in the ball of radius `omega`.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    params: &ModelParams,
    nl: &NonlinearityParams,
    spec: &GridSpec,
    initial: &FieldGrid,
    boundary: &dyn EvolutionData,
    t_end: f64,
    n_steps: usize,
    omega: f64,
    max_iter: usize,
) -> Result<(Trajectory, ContractionReport)> {
    let dt = t_end / n_steps as f64;
    let mut current = time_step_solve(params, spec, boundary, Some(initial), t_end, n_steps, 1)?;
    let mut norms = vec![solution_norm(&current, params)];
    let mut differences: Vec<f64> = Vec::new();
    let mut contracting = Vec::new();
    for _ in 0..max_iter.max(MIN_CONTRACTING_RUN + 1) {
        let forcing: Vec<InteriorData> = current.fields.iter().map(|f| nonlinearity_eval(f, nl)).collect();
        let data = PicardData { boundary, forcing, dt };
        let next = time_step_solve(params, spec, &data, Some(initial), t_end, n_steps, 1)?;
        let diff = solution_norm(&trajectory_difference(&next, &current), params);
        let norm = solution_norm(&next, params);
        let floor = ROUND_OFF_FLOOR * norm;
        if let Some(prev) = differences.last() {
            contracting.push(diff <= floor || diff < *prev);
        }
        norms.push(norm);
        differences.push(diff);
        current = next;
        if !diff.is_finite() || norm > omega {
            break;
        }
        let run = contracting.iter().rev().take_while(|c| **c).count();
        if run >= MIN_CONTRACTING_RUN && (diff <= floor || contracting.len() >= max_iter) {
            break;
        }
    }
    let ratios: Vec<f64> = differences.windows(2).map(|w| w[1] / w[0]).collect();
    let informative: Vec<f64> = ratios
        .iter()
        .zip(differences.iter().skip(1).zip(norms.iter().skip(2)))
        .filter(|(_, (d, n))| **d > ROUND_OFF_FLOOR * **n)
        .map(|(r, _)| *r)
        .collect();
    let run = contracting.iter().rev().take_while(|c| **c).count();
    let in_ball = norms.iter().all(|n| n.is_finite() && *n <= omega);
    let kappa = informative.iter().copied().fold(0.0, f64::max);
    let contracted = in_ball && run >= MIN_CONTRACTING_RUN && kappa < 1.0;
    let report =
        ContractionReport { schema_version: crate::SCHEMA_VERSION, differences, ratios, norms, contracted, kappa };
    if !contracted {
        return Err(Error::NoContraction { ratios: report.ratios.clone() });
    }
    Ok((current, report))
}

/// Result of the smallness-threshold search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub schema_version: u32,
    /// `(initial-data norm, kappa)` of every contracting run.
    pub contracting: Vec<(f64, f64)>,
    /// Largest tested initial-data norm that still contracted.
    pub threshold: Option<f64>,
    /// First norm at which the iteration failed, if any within the cap.
    pub first_failure: Option<f64>,
}

/// Scales `shape` to initial-data norms `eps0, 2 eps0, 4 eps0, ...` until
/// the Picard iteration stops contracting or `eps_max` is exceeded.
#[allow(clippy::too_many_arguments)]
pub fn smallness_threshold(
    params: &ModelParams,
    nl: &NonlinearityParams,
    spec: &GridSpec,
    shape: &FieldGrid,
    t_end: f64,
    n_steps: usize,
    eps0: f64,
    eps_max: f64,
    max_iter: usize,
) -> Result<ThresholdReport> {
    let unit = initial_data_norm(shape, params.q);
    if !(unit > 0.0) {
        return Err(Error::InvalidInput("initial data must be non-zero".into()));
    }
    let boundary = ZeroBoundary { spec: spec.clone() };
    let mut contracting = Vec::new();
    let mut first_failure = None;
    let mut eps = eps0;
    while eps <= eps_max {
        let mut init = shape.clone();
        init.scale(C64::new(eps / unit, 0.0));
        match picard_iterate(params, nl, spec, &init, &boundary, t_end, n_steps, f64::INFINITY, max_iter) {
            Ok((_, rep)) => contracting.push((eps, rep.kappa)),
            Err(Error::NoContraction { .. }) => {
                first_failure = Some(eps);
                break;
            }
            Err(e) => return Err(e),
        }
        eps *= 2.0;
    }
    let threshold = contracting.last().map(|c| c.0);
    Ok(ThresholdReport { schema_version: crate::SCHEMA_VERSION, contracting, threshold, first_failure })
}

/// Homogeneous boundary data.
pub struct ZeroBoundary {
    pub spec: GridSpec,
}

impl EvolutionData for ZeroBoundary {
    fn boundary(&self, _t: f64) -> BoundaryFields {
        BoundaryFields::zeros(&self.spec)
    }
}

/// Smooth, compactly concentrated initial state: `u = curl psi` in the
/// `(x_1, x_N)` plane and `Q = psi S_0` with a fixed traceless symmetric
/// `S_0`, for a Gaussian `psi` of the given width centred at `center`.
/// `u` is divergence free; both vanish to round-off at the wall when the
/// centre is several widths away from it.
pub fn vortex_initial_data(spec: &GridSpec, center: &[f64], width: f64, amplitude: f64) -> FieldGrid {
    let n = spec.dim;
    let x = spec.normal.points();
    let nz = x.len();
    let mut f = FieldGrid::zeros(spec);
    let mut s0 = vec![vec![0.0; n]; n];
    for (j, row) in s0.iter_mut().enumerate() {
        row[j] = if j == 0 { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 };
    }
    s0[0][n - 1] = 0.5;
    s0[n - 1][0] = 0.5;
    for t in 0..spec.n_tan() {
        let xt = spec.tangential_coords(t);
        for (k, &xn) in x.iter().enumerate() {
            let pos: Vec<f64> = xt.iter().copied().chain(std::iter::once(xn)).collect();
            let r2: f64 = pos.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            let psi = amplitude * (-r2 / (width * width)).exp();
            let dpsi = |j: usize| -2.0 * (pos[j] - center[j]) / (width * width) * psi;
            let i = t * nz + k;
            f.u[0][i] = C64::new(dpsi(n - 1), 0.0);
            f.u[n - 1][i] = C64::new(-dpsi(0), 0.0);
            for j in 0..n {
                for l in 0..n {
                    f.q[j * n + l][i] = C64::new(psi * s0[j][l], 0.0);
                }
            }
        }
    }
    f
}

/// Sobolev surrogate `||u_0||_{W^{2,q}} + ||Q_0||_{W^{3,q}}` of the
/// initial-data norm.
pub fn initial_data_norm(field: &FieldGrid, q: f64) -> f64 {
    let d = Differentiator::new(&field.spec);
    let w = point_weights(&field.spec);
    let ucomps: Vec<&Vec<C64>> = field.u.iter().collect();
    let qcomps: Vec<&Vec<C64>> = field.q.iter().collect();
    let mut s = 0.0;
    for k in 0..=2 {
        let v = derivatives_of(&d, &ucomps, k);
        s += lq_norm(&v.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), &w, q);
    }
    for k in 0..=3 {
        let v = derivatives_of(&d, &qcomps, k);
        s += lq_norm(&v.iter().map(|c| c.as_slice()).collect::<Vec<_>>(), &w, q);
    }
    s
}

/// Boundary data switched on and off by a Gaussian pulse in time:
/// `h = s(t) (cos x_1 + sin(2 x_1) / 2) e_1` and
/// `H = s(t) cos x_1 (c (e_1 e_1 - e_N e_N) + d (e_1 e_N + e_N e_1))`,
/// `s(t) = amplitude exp(-((t - center) / width)^2)`.
#[derive(Debug, Clone)]
pub struct PulseData {
    pub spec: GridSpec,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl PulseData {
    /// Pulse centred in `[0, t_end]` and negligible (below `1e-11`) at both ends.
    pub fn centered(spec: &GridSpec, t_end: f64) -> Self {
        Self { spec: spec.clone(), center: 0.5 * t_end, width: 0.1 * t_end, amplitude: 1.0 }
    }
}

impl EvolutionData for PulseData {
    fn boundary(&self, t: f64) -> BoundaryFields {
        let n = self.spec.dim;
        let s = self.amplitude * (-((t - self.center) / self.width).powi(2)).exp();
        let mut b = BoundaryFields::zeros(&self.spec);
        let (c, d) = (0.7, 0.3);
        for i in 0..self.spec.n_tan() {
            let x = self.spec.tangential_coords(i)[0];
            let v = s * x.cos();
            b.h[0][i] = C64::new(s * (x.cos() + 0.5 * (2.0 * x).sin()), 0.0);
            b.hq[0][i] = C64::new(c * v, 0.0);
            b.hq[n * n - 1][i] = C64::new(-c * v, 0.0);
            b.hq[n - 1][i] = C64::new(d * v, 0.0);
            b.hq[(n - 1) * n][i] = C64::new(d * v, 0.0);
        }
        b
    }
}
