//! Resolvent problem on a discretised half-space: tangential DFT with one
//! amplitude solve per mode, a whole-space FFT solve for interior data via
//! parity extension, the boundary corrector, and weak-Neumann pressure
//! recovery.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{solve_mode, BoundaryModeData, ModeSolution};
use crate::error::{Error, Result};
use crate::field::{fd_weights, fft_axes, frequency, FieldGrid, GridSpec, NormalSpec};
use crate::params::ModelParams;
use crate::profile::{eval_profile, mode_residual, ModeProfile, ProfileSample};
use crate::tensor::I;
use crate::C64;

const Z: C64 = C64 { re: 0.0, im: 0.0 };

/// Boundary data on the tangential grid: `h` (N components) and the
/// Neumann data `hq` of `Q` (all N^2 entries, `hq[j * N + k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFields {
    pub h: Vec<Vec<C64>>,
    pub hq: Vec<Vec<C64>>,
}

impl BoundaryFields {
    pub fn zeros(spec: &GridSpec) -> Self {
        let n = spec.dim;
        let z = vec![Z; spec.n_tan()];
        Self { h: vec![z.clone(); n], hq: vec![z; n * n] }
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().chain(&self.hq).all(|c| c.iter().all(|z| *z == Z))
    }

    pub fn axpy(&mut self, s: C64, o: &BoundaryFields) {
        for (a, b) in self.h.iter_mut().chain(self.hq.iter_mut()).zip(o.h.iter().chain(&o.hq)) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
    }
}

/// Interior forcing `(f, G)` on the half-space grid; `g` holds all N^2 entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorData {
    pub f: Vec<Vec<C64>>,
    pub g: Vec<Vec<C64>>,
}

impl InteriorData {
    pub fn zeros(spec: &GridSpec) -> Self {
        let n = spec.dim;
        let z = vec![Z; spec.n_points()];
        Self { f: vec![z.clone(); n], g: vec![z; n * n] }
    }

    pub fn is_zero(&self) -> bool {
        self.f.iter().chain(&self.g).all(|c| c.iter().all(|z| *z == Z))
    }

    pub fn axpy(&mut self, s: C64, o: &InteriorData) {
        for (a, b) in self.f.iter_mut().chain(self.g.iter_mut()).zip(o.f.iter().chain(&o.g)) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
    }
}

/// Reflection parity of each component: `true` for even.
/// Tangential velocity and `Q_jk` with `j, k < N` or `j = k = N` are even;
/// the normal velocity and mixed `Q_jN` entries are odd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionTable {
    pub vector: Vec<bool>,
    pub tensor: Vec<bool>,
}

impl ExtensionTable {
    pub fn new(dim: usize) -> Self {
        let vector = (0..dim).map(|j| j < dim - 1).collect();
        let tensor = (0..dim * dim).map(|i| (i / dim < dim - 1) == (i % dim < dim - 1)).collect();
        Self { vector, tensor }
    }
}

/// Parity-extended data on the doubled normal grid `[-X, X)`.
#[derive(Debug, Clone)]
pub struct ExtendedData {
    pub shape: Vec<usize>,
    pub f: Vec<Vec<C64>>,
    pub g: Vec<Vec<C64>>,
}

fn uniform_x_max(spec: &GridSpec) -> Result<f64> {
    match spec.normal {
        NormalSpec::Uniform { x_max, .. } => Ok(x_max),
        _ => Err(Error::InvalidInput("interior data needs a uniform normal grid for the whole-space solve".into())),
    }
}

fn doubled_shape(spec: &GridSpec) -> Vec<usize> {
    let mut s = spec.counts.clone();
    s.push(2 * spec.n_normal());
    s
}

fn extend(c: &[C64], spec: &GridSpec, even: bool) -> Vec<C64> {
    let nz = spec.n_normal();
    let mut out = vec![Z; spec.n_tan() * 2 * nz];
    let sign = if even { 1.0 } else { -1.0 };
    for t in 0..spec.n_tan() {
        let src = &c[t * nz..(t + 1) * nz];
        let dst = &mut out[t * 2 * nz..(t + 1) * 2 * nz];
        dst[..nz].copy_from_slice(src);
        for k in 1..nz {
            dst[2 * nz - k] = sign * src[k];
        }
        if !even {
            dst[0] = Z;
        }
    }
    out
}

fn restrict(c: &[C64], spec: &GridSpec) -> Vec<C64> {
    let nz = spec.n_normal();
    (0..spec.n_tan()).flat_map(|t| c[t * 2 * nz..t * 2 * nz + nz].iter().copied()).collect()
}

/// Parity extension of `(f, G)` to the doubled normal grid.
pub fn extend_data(data: &InteriorData, spec: &GridSpec) -> ExtendedData {
    let tab = ExtensionTable::new(spec.dim);
    ExtendedData {
        shape: doubled_shape(spec),
        f: data.f.iter().zip(&tab.vector).map(|(c, &e)| extend(c, spec, e)).collect(),
        g: data.g.iter().zip(&tab.tensor).map(|(c, &e)| extend(c, spec, e)).collect(),
    }
}

/// Restriction of extended data back to the half-space grid.
pub fn restrict_data(ext: &ExtendedData, spec: &GridSpec) -> InteriorData {
    InteriorData {
        f: ext.f.iter().map(|c| restrict(c, spec)).collect(),
        g: ext.g.iter().map(|c| restrict(c, spec)).collect(),
    }
}

/// Whole-space solution in frequency space on the doubled grid.
#[derive(Debug, Clone)]
pub struct WholeSpaceSolution {
    pub shape: Vec<usize>,
    /// Angular frequency vector per flat index; `None` on Nyquist lines.
    pub freqs: Vec<Option<Vec<f64>>>,
    pub v_hat: Vec<Vec<C64>>,
    pub rho_hat: Vec<C64>,
    pub q_hat: Vec<Vec<C64>>,
    /// Smallest `|S(xi)| / (|lambda| + |xi|^2)` over the grid.
    pub min_symbol: f64,
}

fn full_frequencies(spec: &GridSpec, x_max: f64) -> Vec<Option<Vec<f64>>> {
    let shape = doubled_shape(spec);
    let mut periods = spec.lengths.clone();
    periods.push(2.0 * x_max);
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut xi = vec![0.0; shape.len()];
            for a in (0..shape.len()).rev() {
                let i = idx % shape[a];
                idx /= shape[a];
                xi[a] = frequency(i, shape[a], periods[a])?;
            }
            Some(xi)
        })
        .collect()
}

/// Scalar symbol `lambda + |xi|^2 [1 + beta^2 (a + |xi|^2) / (2 (lambda + a + |xi|^2))]`.
pub fn wholespace_symbol(params: &ModelParams, lambda: C64, xi2: f64) -> C64 {
    let mu = lambda + params.a + xi2;
    lambda + xi2 * (1.0 + params.beta * params.beta * (params.a + xi2) / (2.0 * mu))
}

/// Solves the whole-space resolvent problem frequency by frequency.
pub fn solve_wholespace(
    params: &ModelParams,
    lambda: C64,
    ext: &ExtendedData,
    spec: &GridSpec,
) -> Result<WholeSpaceSolution> {
    let n = spec.dim;
    let x_max = uniform_x_max(spec)?;
    let shape = ext.shape.clone();
    let axes: Vec<usize> = (0..n).collect();
    let fwd = |c: &Vec<C64>| {
        let mut d = c.clone();
        fft_axes(&mut d, &shape, &axes, true);
        d
    };
    let f_hat: Vec<Vec<C64>> = ext.f.iter().map(fwd).collect();
    let g_hat: Vec<Vec<C64>> = ext.g.iter().map(fwd).collect();
    let freqs = full_frequencies(spec, x_max);
    let total = freqs.len();
    let beta = params.beta;
    let per: Vec<(Vec<C64>, C64, Vec<C64>, f64)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let Some(xi) = &freqs[i] else {
                return (vec![Z; n], Z, vec![Z; n * n], f64::INFINITY);
            };
            let xi2: f64 = xi.iter().map(|x| x * x).sum();
            let mu = lambda + params.a + xi2;
            let s = wholespace_symbol(params, lambda, xi2);
            let ratio = s.norm() / (lambda.norm() + xi2);
            // F = f + beta (a + |xi|^2) (i G xi) / mu
            let mut ff = vec![Z; n];
            for j in 0..n {
                let mut gx = Z;
                for k in 0..n {
                    gx += I * xi[k] * g_hat[j * n + k][i];
                }
                ff[j] = f_hat[j][i] + beta * (params.a + xi2) * gx / mu;
            }
            let (v, rho) = if xi2 == 0.0 {
                (ff.iter().map(|x| x / lambda).collect::<Vec<_>>(), Z)
            } else {
                let xf: C64 = (0..n).map(|k| xi[k] * ff[k]).sum();
                let v = (0..n).map(|j| (ff[j] - xi[j] * xf / xi2) / s).collect();
                (v, -I * xf / xi2)
            };
            let mut q = vec![Z; n * n];
            for j in 0..n {
                for k in 0..n {
                    let du = 0.5 * I * (xi[k] * v[j] + xi[j] * v[k]);
                    q[j * n + k] = (g_hat[j * n + k][i] + beta * du) / mu;
                }
            }
            (v, rho, q, ratio)
        })
        .collect();
    let mut v_hat = vec![vec![Z; total]; n];
    let mut q_hat = vec![vec![Z; total]; n * n];
    let mut rho_hat = vec![Z; total];
    let mut min_symbol = f64::INFINITY;
    for (i, (v, rho, q, ratio)) in per.into_iter().enumerate() {
        if ratio < 1e-13 {
            return Err(Error::SymbolVanished(freqs[i].clone().unwrap_or_default()));
        }
        min_symbol = min_symbol.min(ratio);
        for j in 0..n {
            v_hat[j][i] = v[j];
        }
        for j in 0..n * n {
            q_hat[j][i] = q[j];
        }
        rho_hat[i] = rho;
    }
    Ok(WholeSpaceSolution { shape, freqs, v_hat, rho_hat, q_hat, min_symbol })
}

impl WholeSpaceSolution {
    /// Applies the derivative `D^alpha` (counts per axis, normal last) to a
    /// frequency array and returns the restriction to the half-space grid.
    pub fn derivative(&self, hat: &[C64], alpha: &[usize], spec: &GridSpec) -> Vec<C64> {
        let mut d: Vec<C64> = hat
            .iter()
            .zip(&self.freqs)
            .map(|(z, xi)| match xi {
                Some(xi) => alpha.iter().zip(xi).fold(*z, |acc, (&m, &x)| acc * (I * x).powu(m as u32)),
                None => Z,
            })
            .collect();
        let axes: Vec<usize> = (0..self.shape.len()).collect();
        fft_axes(&mut d, &self.shape, &axes, false);
        restrict(&d, spec)
    }

    /// `(v, rho, V)` restricted to the half-space grid.
    pub fn to_field(&self, spec: &GridSpec) -> FieldGrid {
        let n = spec.dim;
        let zero = vec![0; n];
        let mut f = FieldGrid::zeros(spec);
        for j in 0..n {
            f.u[j] = self.derivative(&self.v_hat[j], &zero, spec);
        }
        f.p = self.derivative(&self.rho_hat, &zero, spec);
        for j in 0..n * n {
            f.q[j] = self.derivative(&self.q_hat[j], &zero, spec);
        }
        f
    }

    /// Traces `v|_0` and `D_N V|_0` on the tangential grid.
    pub fn wall_traces(&self, spec: &GridSpec) -> BoundaryFields {
        let n = spec.dim;
        let nz = spec.n_normal();
        let wall = |c: Vec<C64>| (0..spec.n_tan()).map(|t| c[t * nz]).collect::<Vec<_>>();
        let zero = vec![0; n];
        let mut dn = vec![0; n];
        dn[n - 1] = 1;
        BoundaryFields {
            h: self.v_hat.iter().map(|c| wall(self.derivative(c, &zero, spec))).collect(),
            hq: self.q_hat.iter().map(|c| wall(self.derivative(c, &dn, spec))).collect(),
        }
    }
}

/// Per-mode solutions of the boundary problem on a tangential grid.
#[derive(Debug, Clone)]
pub struct BoundaryModes {
    pub spec: GridSpec,
    pub lambda: C64,
    pub modes: Vec<Option<(ModeSolution, ModeProfile)>>,
    pub data: Vec<BoundaryModeData>,
}

/// Diagnostics of a boundary solve.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub max_mode_residual: f64,
    pub modes_solved: usize,
}

/// Tangential DFT of the boundary data and one amplitude solve per mode.
pub fn solve_boundary_modes(
    params: &ModelParams,
    lambda: C64,
    bdry: &BoundaryFields,
    spec: &GridSpec,
) -> Result<BoundaryModes> {
    spec.validate()?;
    let n = spec.dim;
    let tan_axes: Vec<usize> = (0..n - 1).collect();
    let fwd = |c: &Vec<C64>| {
        let mut d = c.clone();
        fft_axes(&mut d, &spec.counts, &tan_axes, true);
        d
    };
    let h_hat: Vec<Vec<C64>> = bdry.h.iter().map(fwd).collect();
    let hq_hat: Vec<Vec<C64>> = bdry.hq.iter().map(fwd).collect();
    let data: Vec<BoundaryModeData> = (0..spec.n_tan())
        .map(|t| {
            let mut d = BoundaryModeData::zero();
            for j in 0..n {
                d.h[j] = h_hat[j][t];
                for k in 0..n {
                    d.hq[j][k] = hq_hat[j * n + k][t];
                }
            }
            d
        })
        .collect();
    let scale = data.iter().map(|d| d.norm(n)).fold(0.0, f64::max);
    let modes = (0..spec.n_tan())
        .into_par_iter()
        .map(|t| {
            let Some(xi) = spec.tangential_frequency(t) else { return Ok(None) };
            let mut d = data[t];
            if d.norm(n) <= 1e-15 * scale || d.norm(n) == 0.0 {
                return Ok(None);
            }
            if d.h[n - 1].norm() > 1e-9 * (scale + d.norm(n)) {
                return Err(Error::InvalidInput("normal component of the velocity trace must vanish".into()));
            }
            d.h[n - 1] = Z;
            let sol = solve_mode(params, lambda, &xi, &d)?;
            let prof = eval_profile(&sol);
            Ok(Some((sol, prof)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryModes { spec: spec.clone(), lambda, modes, data })
}

impl BoundaryModes {
    /// Synthesises `ncomp` physical-space fields from the mode profiles: `f`
    /// maps the tangential frequency and the profile derivatives up to
    /// `order` at one normal point to the component values.
    pub fn synthesize<F>(&self, order: usize, ncomp: usize, f: F) -> Vec<Vec<C64>>
    where
        F: Fn(&[f64], &[ProfileSample]) -> Vec<C64> + Sync,
    {
        let spec = &self.spec;
        let x = spec.normal.points();
        let nz = x.len();
        let cols: Vec<Option<Vec<Vec<C64>>>> = self
            .modes
            .par_iter()
            .enumerate()
            .map(|(t, m)| {
                let (_, prof) = m.as_ref()?;
                let xi = spec.tangential_frequency(t)?;
                Some(x.iter().map(|&xx| f(&xi, &prof.eval(xx, order))).collect())
            })
            .collect();
        let mut out = vec![vec![Z; spec.n_points()]; ncomp];
        for (t, col) in cols.iter().enumerate() {
            if let Some(col) = col {
                for (k, vals) in col.iter().enumerate() {
                    for c in 0..ncomp {
                        out[c][t * nz + k] = vals[c];
                    }
                }
            }
        }
        let shape: Vec<usize> = spec.counts.iter().copied().chain(std::iter::once(nz)).collect();
        let axes: Vec<usize> = (0..spec.dim - 1).collect();
        for c in out.iter_mut() {
            fft_axes(c, &shape, &axes, false);
        }
        out
    }

    /// `(u, p, Q)` on the grid.
    pub fn to_field(&self) -> FieldGrid {
        let n = self.spec.dim;
        let comps = self.synthesize(0, n + 1 + n * n, |_, d| {
            let s = &d[0];
            let mut v: Vec<C64> = s.u[..n].to_vec();
            v.push(s.p);
            for j in 0..n {
                v.extend_from_slice(&s.q[j][..n]);
            }
            v
        });
        let mut f = FieldGrid::zeros(&self.spec);
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

    /// Largest normalised mode residual over the normal grid.
    pub fn report(&self, params: &ModelParams) -> BoundaryReport {
        let x = self.spec.normal.points();
        let (worst, count) = self
            .modes
            .par_iter()
            .enumerate()
            .filter_map(|(t, m)| m.as_ref().map(|(sol, prof)| (t, sol, prof)))
            .map(|(t, sol, prof)| (mode_residual(params, &sol.mode, &self.data[t], prof, &x).max(), 1usize))
            .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
        BoundaryReport { max_mode_residual: worst, modes_solved: count }
    }
}

/// Boundary-driven solve: `f = G = 0`, traces `h`, `H`.
pub fn solve_boundary(params: &ModelParams, lambda: C64, bdry: &BoundaryFields, spec: &GridSpec) -> Result<FieldGrid> {
    Ok(solve_boundary_modes(params, lambda, bdry, spec)?.to_field())
}

/// Both parts of a full resolvent solve, kept separately so derivatives of
/// the solution can be synthesised exactly.
#[derive(Debug, Clone)]
pub struct ResolventParts {
    pub wholespace: Option<WholeSpaceSolution>,
    pub corrector: BoundaryModes,
}

/// Whole-space solve of the extended interior data plus the boundary
/// corrector for the remaining traces.
pub fn solve_resolvent_parts(
    params: &ModelParams,
    lambda: C64,
    data: &InteriorData,
    bdry: &BoundaryFields,
    spec: &GridSpec,
) -> Result<ResolventParts> {
    spec.validate()?;
    if data.is_zero() {
        return Ok(ResolventParts { wholespace: None, corrector: solve_boundary_modes(params, lambda, bdry, spec)? });
    }
    let ext = extend_data(data, spec);
    let ws = solve_wholespace(params, lambda, &ext, spec)?;
    let tr = ws.wall_traces(spec);
    let mut corrected = bdry.clone();
    corrected.axpy(C64::new(-1.0, 0.0), &tr);
    let corrector = solve_boundary_modes(params, lambda, &corrected, spec)?;
    Ok(ResolventParts { wholespace: Some(ws), corrector })
}

impl ResolventParts {
    pub fn to_field(&self) -> FieldGrid {
        let mut f = self.corrector.to_field();
        if let Some(ws) = &self.wholespace {
            f.axpy(C64::new(1.0, 0.0), &ws.to_field(&self.corrector.spec));
        }
        f
    }
}

/// Full resolvent solve with interior data `(f, G)` and traces `(h, H)`.
pub fn solve_resolvent_full(
    params: &ModelParams,
    lambda: C64,
    data: &InteriorData,
    bdry: &BoundaryFields,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    Ok(solve_resolvent_parts(params, lambda, data, bdry, spec)?.to_field())
}

/// `E_m(k) = int_0^1 e^{-k (1 - s)} s^m ds` for `m = 0..=3`.
fn exp_moments(k: f64) -> [f64; 4] {
    let mut e = [0.0; 4];
    if k < 1.0 {
        // sum_n (-k)^n m! / (m + n + 1)!
        for (m, em) in e.iter_mut().enumerate() {
            let mut fact_m = 1.0;
            for i in 1..=m {
                fact_m *= i as f64;
            }
            let mut denom = (1..=m + 1).map(|i| i as f64).product::<f64>();
            let mut pow = 1.0;
            let mut sum = 0.0;
            for n in 0..40 {
                sum += pow * fact_m / denom;
                pow *= -k;
                denom *= (m + n + 2) as f64;
            }
            *em = sum;
        }
    } else {
        e[0] = -(-k).exp_m1() / k;
        for m in 1..4 {
            e[m] = (1.0 - m as f64 * e[m - 1]) / k;
        }
    }
    e
}

/// Left and right exponential sweeps on a half-line grid:
/// `L_i = int_0^{x_i} e^{-a (x_i - y)} phi dy`, `R_i = int_{x_i}^{x_end} e^{-a (y - x_i)} phi dy`,
/// with `phi` interpolated piecewise linearly, or by cubic Hermite when `dphi` is given.
pub fn exponential_sweeps(a: f64, x: &[f64], phi: &[C64], dphi: Option<&[C64]>) -> (Vec<C64>, Vec<C64>) {
    let n = x.len();
    let mut l = vec![Z; n];
    let mut r = vec![Z; n];
    // integral over one cell of e^{-a (h - s)} phi(x_i + s) (left) and e^{-a s} phi(x_i + s) (right)
    let cell = |i: usize, forward: bool| -> C64 {
        let h = x[i + 1] - x[i];
        let e = exp_moments(a * h);
        // local polynomial in sigma = s / h, coefficients c_m
        let (p0, p1) = (phi[i], phi[i + 1]);
        let c = match dphi {
            Some(d) => {
                let (d0, d1) = (d[i] * h, d[i + 1] * h);
                [p0, d0, 3.0 * (p1 - p0) - 2.0 * d0 - d1, 2.0 * (p0 - p1) + d0 + d1]
            }
            None => [p0, p1 - p0, Z, Z],
        };
        if forward {
            h * (0..4).map(|m| c[m] * e[m]).sum::<C64>()
        } else {
            // e^{-a h sigma}: substitute sigma -> 1 - sigma
            let cr = [c[0] + c[1] + c[2] + c[3], -(c[1] + 2.0 * c[2] + 3.0 * c[3]), c[2] + 3.0 * c[3], -c[3]];
            h * (0..4).map(|m| cr[m] * e[m]).sum::<C64>()
        }
    };
    for i in 0..n - 1 {
        let h = x[i + 1] - x[i];
        l[i + 1] = (-a * h).exp() * l[i] + cell(i, true);
    }
    for i in (0..n - 1).rev() {
        let h = x[i + 1] - x[i];
        r[i] = (-a * h).exp() * r[i + 1] + cell(i, false);
    }
    (l, r)
}

/// Weak-Neumann pressure of one tangential mode on the half-line nodes `x`
/// (starting at 0): solves `<grad p, grad phi> = <F, grad phi>` by even
/// reflection of `p` and the free-space kernel `e^{-A|s|}/(2A)`.
/// `ft[j]` are the tangential components of `F`, `fnorm` its normal one,
/// with optional exact normal derivatives. Returns `grad p` (N components).
pub fn weak_neumann_mode(
    xi: &[f64],
    x: &[f64],
    ft: &[Vec<C64>],
    fnorm: &[C64],
    dft: Option<&[Vec<C64>]>,
    dfnorm: Option<&[C64]>,
) -> Vec<Vec<C64>> {
    let n = xi.len() + 1;
    let a = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let m = x.len();
    if a == 0.0 {
        let mut out = vec![vec![Z; m]; n];
        out[n - 1] = fnorm.to_vec();
        return out;
    }
    // phi_e = i xi' . F', even; phi_o = F_N, odd
    let phi_e: Vec<C64> = (0..m).map(|i| (0..n - 1).map(|j| I * xi[j] * ft[j][i]).sum()).collect();
    let dphi_e: Option<Vec<C64>> = dft.map(|d| (0..m).map(|i| (0..n - 1).map(|j| I * xi[j] * d[j][i]).sum()).collect());
    let (le, re) = exponential_sweeps(a, x, &phi_e, dphi_e.as_deref());
    let (lo, ro) = exponential_sweeps(a, x, fnorm, dfnorm);
    let mut p = vec![Z; m];
    let mut dp = vec![Z; m];
    for i in 0..m {
        let w = (-a * x[i]).exp();
        // g * phi with reflection sign s: (L + R + s e^{-ax} R(0)) / (2a)
        let g_e = (le[i] + re[i] + w * re[0]) / (2.0 * a);
        let g_o = (lo[i] + ro[i] - w * ro[0]) / (2.0 * a);
        // g' * phi: (R - L - s e^{-ax} R(0)) / 2
        let gp_e = (re[i] - le[i] - w * re[0]) / 2.0;
        let gp_o = (ro[i] - lo[i] + w * ro[0]) / 2.0;
        p[i] = -g_e - gp_o;
        // g'' * phi = a^2 g * phi - phi
        dp[i] = -gp_e - (a * a * g_o - fnorm[i]);
    }
    let mut out: Vec<Vec<C64>> = (0..n - 1).map(|j| p.iter().map(|v| I * xi[j] * v).collect()).collect();
    out.push(dp);
    out
}

/// Right-hand side `F` of the weak-Neumann problem for one mode from the
/// profile derivatives, using the `Q` equation to avoid third derivatives:
/// `F = f + beta Div G - lambda u + (1 + beta^2/2) Lap u - beta lambda Div Q`
/// (here `f = G = 0`). Returns `(F, dF/dx)` at each node.
pub fn neumann_rhs_from_profile(
    params: &ModelParams,
    lambda: C64,
    xi: &[f64],
    prof: &ModeProfile,
    x: &[f64],
) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let n = xi.len() + 1;
    let a2: f64 = xi.iter().map(|v| v * v).sum();
    let cb = 1.0 + 0.5 * params.beta * params.beta;
    let mut f = vec![vec![Z; x.len()]; n];
    let mut df = vec![vec![Z; x.len()]; n];
    for (i, &xx) in x.iter().enumerate() {
        let d = prof.eval(xx, 3);
        for (o, out) in [(0usize, &mut f), (1usize, &mut df)] {
            for j in 0..n {
                let lap = d[o + 2].u[j] - a2 * d[o].u[j];
                let mut divq = d[o + 1].q[j][n - 1];
                for k in 0..n - 1 {
                    divq += I * xi[k] * d[o].q[j][k];
                }
                out[j][i] = -lambda * d[o].u[j] + cb * lap - params.beta * lambda * divq;
            }
        }
    }
    (f, df)
}

/// Largest relative difference between the weak-Neumann pressure gradient
/// and the gradient of the amplitude-based pressure of a solved mode.
pub fn pressure_agreement(params: &ModelParams, sol: &ModeSolution, x: &[f64]) -> f64 {
    let prof = eval_profile(sol);
    let xi = &sol.mode.xi_prime;
    let n = sol.mode.dim;
    let (f, df) = neumann_rhs_from_profile(params, sol.mode.lambda, xi, &prof, x);
    let dft: Vec<Vec<C64>> = df[..n - 1].to_vec();
    let grad = weak_neumann_mode(xi, x, &f[..n - 1], &f[n - 1], Some(&dft), Some(&df[n - 1]));
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, &xx) in x.iter().enumerate() {
        let d = prof.eval(xx, 1);
        for j in 0..n {
            let exact = if j < n - 1 { I * xi[j] * d[0].p } else { d[1].p };
            err = err.max((grad[j][i] - exact).norm());
            scale = scale.max(exact.norm());
        }
    }
    err / scale.max(f64::MIN_POSITIVE)
}

/// Normal derivative of order `m` of every tangential column of `c`, by
/// five-point finite differences on the normal grid.
pub fn normal_derivative(c: &[C64], spec: &GridSpec, m: usize) -> Vec<C64> {
    let x = spec.normal.points();
    let nz = x.len();
    let stencils: Vec<(usize, Vec<f64>)> = (0..nz)
        .map(|k| {
            let s = k.saturating_sub(2).min(nz.saturating_sub(5));
            let e = (s + 5).min(nz);
            (s, fd_weights(x[k], &x[s..e], m)[m].clone())
        })
        .collect();
    let mut out = vec![Z; c.len()];
    for t in 0..spec.n_tan() {
        for k in 0..nz {
            let (s, w) = &stencils[k];
            out[t * nz + k] = w.iter().enumerate().map(|(i, wi)| *wi * c[t * nz + s + i]).sum();
        }
    }
    out
}

/// Pressure gradient of a field by the weak-Neumann route: tangential DFT,
/// normal derivatives by finite differences, then the reflected kernel per
/// mode. Accuracy is limited by the normal grid.
pub fn pressure_recovery(
    params: &ModelParams,
    lambda: C64,
    field: &FieldGrid,
    forcing: Option<&InteriorData>,
) -> Result<Vec<Vec<C64>>> {
    let spec = &field.spec;
    let n = spec.dim;
    let nz = spec.n_normal();
    let shape: Vec<usize> = spec.counts.iter().copied().chain(std::iter::once(nz)).collect();
    let axes: Vec<usize> = (0..n - 1).collect();
    let fwd = |c: &[C64]| {
        let mut d = c.to_vec();
        fft_axes(&mut d, &shape, &axes, true);
        d
    };
    let cb = 1.0 + 0.5 * params.beta * params.beta;
    let u_hat: Vec<Vec<C64>> = field.u.iter().map(|c| fwd(c)).collect();
    let q_hat: Vec<Vec<C64>> = field.q.iter().map(|c| fwd(c)).collect();
    let f_hat: Option<(Vec<_>, Vec<_>)> =
        forcing.map(|d| (d.f.iter().map(|c| fwd(c)).collect(), d.g.iter().map(|c| fwd(c)).collect()));
    let d2u: Vec<Vec<C64>> = u_hat.iter().map(|c| normal_derivative(c, spec, 2)).collect();
    let dq: Vec<Vec<C64>> = (0..n).map(|j| normal_derivative(&q_hat[j * n + n - 1], spec, 1)).collect();
    let dg: Option<Vec<Vec<C64>>> =
        f_hat.as_ref().map(|(_, g)| (0..n).map(|j| normal_derivative(&g[j * n + n - 1], spec, 1)).collect());
    let x = spec.normal.points();
    let cols: Vec<Vec<Vec<C64>>> = (0..spec.n_tan())
        .into_par_iter()
        .map(|t| {
            let Some(xi) = spec.tangential_frequency(t) else { return vec![vec![Z; nz]; n] };
            let a2: f64 = xi.iter().map(|v| v * v).sum();
            let mut f = vec![vec![Z; nz]; n];
            for k in 0..nz {
                let i = t * nz + k;
                for j in 0..n {
                    let lap = d2u[j][i] - a2 * u_hat[j][i];
                    let mut divq = dq[j][i];
                    for kk in 0..n - 1 {
                        divq += I * xi[kk] * q_hat[j * n + kk][i];
                    }
                    let mut v = -lambda * u_hat[j][i] + cb * lap - params.beta * lambda * divq;
                    if let (Some((fh, gh)), Some(dg)) = (&f_hat, &dg) {
                        let mut divg = dg[j][i];
                        for kk in 0..n - 1 {
                            divg += I * xi[kk] * gh[j * n + kk][i];
                        }
                        v += fh[j][i] + params.beta * divg;
                    }
                    f[j][k] = v;
                }
            }
            weak_neumann_mode(&xi, &x, &f[..n - 1], &f[n - 1], None, None)
        })
        .collect();
    let mut out = vec![vec![Z; spec.n_points()]; n];
    for (t, col) in cols.iter().enumerate() {
        for j in 0..n {
            out[j][t * nz..(t + 1) * nz].copy_from_slice(&col[j]);
        }
    }
    for c in out.iter_mut() {
        fft_axes(c, &shape, &axes, false);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_moments_switch_is_continuous() {
        let a = exp_moments(1.0 - 1e-12);
        let b = exp_moments(1.0 + 1e-12);
        for m in 0..4 {
            assert!((a[m] - b[m]).abs() < 1e-10, "{m}: {} {}", a[m], b[m]);
        }
        // E_0(0) = 1, E_1(0) = 1/2
        let z = exp_moments(0.0);
        assert!((z[0] - 1.0).abs() < 1e-15 && (z[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn extension_parities() {
        let t = ExtensionTable::new(3);
        assert_eq!(t.vector, vec![true, true, false]);
        // Q_12 even, Q_13 odd, Q_33 even
        assert!(t.tensor[1] && !t.tensor[2] && t.tensor[8]);
    }
}
