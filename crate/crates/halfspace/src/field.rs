//! Sampled fields on a periodic tangential box times a normal grid, FFT
//! helpers, and field I/O.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Normal grid on `[0, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalSpec {
    /// `x_k = k x_max / n`, `k = 0..n`; required by the whole-space FFT solve.
    Uniform { n: usize, x_max: f64 },
    /// Spacing growing geometrically by `ratio` away from the wall.
    Graded { n: usize, x_max: f64, ratio: f64 },
    /// `n + 1` nodes `x(s) = X (e^{k s} - 1) / (e^k - 1)` including both ends;
    /// the node set of the finite-difference mode solver.
    Stretched { n: usize, x_max: f64, stretch: f64 },
}

impl NormalSpec {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            NormalSpec::Uniform { n, x_max } => (0..n).map(|k| k as f64 * x_max / n as f64).collect(),
            NormalSpec::Graded { n, x_max, ratio } => {
                let steps: Vec<f64> = (0..n - 1).map(|k| ratio.powi(k as i32)).collect();
                let total: f64 = steps.iter().sum();
                let mut x = vec![0.0; n];
                for k in 1..n {
                    x[k] = x[k - 1] + steps[k - 1] * x_max / total;
                }
                x
            }
            NormalSpec::Stretched { n, x_max, stretch } => crate::oracle::StretchedGrid { x_max, n, stretch }.nodes(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            NormalSpec::Uniform { n, .. } | NormalSpec::Graded { n, .. } => n,
            NormalSpec::Stretched { n, .. } => n + 1,
        }
    }

    /// Trapezoidal quadrature weights on the normal points.
    pub fn weights(&self) -> Vec<f64> {
        let x = self.points();
        let n = x.len();
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            let h = x[k + 1] - x[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid metadata: tangential point counts and box lengths, and the normal grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub counts: Vec<usize>,
    pub lengths: Vec<f64>,
    pub normal: NormalSpec,
}

impl GridSpec {
    pub fn new(dim: usize, count: usize, length: f64, normal: NormalSpec) -> Self {
        Self { dim, counts: vec![count; dim - 1], lengths: vec![length; dim - 1], normal }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() != self.dim - 1 || self.lengths.len() != self.dim - 1 {
            return Err(Error::InvalidInput("grid needs one count and length per tangential direction".into()));
        }
        if self.counts.iter().any(|&c| c < 2) || self.lengths.iter().any(|&l| !(l > 0.0)) || self.normal.len() < 2 {
            return Err(Error::InvalidInput("grid counts must be at least 2 and lengths positive".into()));
        }
        Ok(())
    }

    /// Number of tangential points.
    pub fn n_tan(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn n_normal(&self) -> usize {
        self.normal.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_tan() * self.n_normal()
    }

    /// Tangential coordinates of flat tangential index `t` (row-major).
    pub fn tangential_coords(&self, t: usize) -> Vec<f64> {
        let mut rem = t;
        let mut out = vec![0.0; self.dim - 1];
        for a in (0..self.dim - 1).rev() {
            let i = rem % self.counts[a];
            rem /= self.counts[a];
            out[a] = self.lengths[a] * i as f64 / self.counts[a] as f64;
        }
        out
    }

    /// Tangential frequency of flat index `t`, or `None` on a Nyquist line.
    pub fn tangential_frequency(&self, t: usize) -> Option<Vec<f64>> {
        let mut rem = t;
        let mut out = vec![0.0; self.dim - 1];
        for a in (0..self.dim - 1).rev() {
            let n = self.counts[a];
            let i = rem % n;
            rem /= n;
            out[a] = frequency(i, n, self.lengths[a])?;
        }
        Some(out)
    }
}

/// Angular frequency of FFT bin `i` of `n` on a period `length`; `None` for the Nyquist bin.
pub fn frequency(i: usize, n: usize, length: f64) -> Option<f64> {
    if n.is_multiple_of(2) && i == n / 2 {
        return None;
    }
    let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    Some(2.0 * PI * k / length)
}

/// In-place FFT of a row-major array of `shape` along each axis in `axes`.
/// The inverse transform is normalised.
pub fn fft_axes(data: &mut [C64], shape: &[usize], axes: &[usize], forward: bool) {
    let mut planner = FftPlanner::<f64>::new();
    for &ax in axes {
        let n = shape[ax];
        let stride: usize = shape[ax + 1..].iter().product();
        let outer: usize = shape[..ax].iter().product();
        let fft = if forward { planner.plan_fft_forward(n) } else { planner.plan_fft_inverse(n) };
        let mut line = vec![C64::new(0.0, 0.0); n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for i in 0..n {
                    line[i] = data[base + i * stride];
                }
                fft.process(&mut line);
                let scale = if forward { 1.0 } else { 1.0 / n as f64 };
                for i in 0..n {
                    data[base + i * stride] = line[i] * scale;
                }
            }
        }
    }
}

/// Weights of the finite-difference derivatives of orders `0..=m` at `z`
/// from the nodes `x` (Fornberg's recursion).
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Spatial derivatives of fields on a grid: spectral in the tangential
/// directions, five-point (six for third order) finite differences along
/// the normal.
#[derive(Debug, Clone)]
pub struct Differentiator {
    pub spec: GridSpec,
    /// `stencils[m - 1][k] = (start, weights)` for normal order `m`.
    stencils: Vec<Vec<(usize, Vec<f64>)>>,
    freqs: Vec<Option<Vec<f64>>>,
}

impl Differentiator {
    pub fn new(spec: &GridSpec) -> Self {
        let x = spec.normal.points();
        let nz = x.len();
        let stencils = (1..=3)
            .map(|m| {
                let width = if m == 3 { 6 } else { 5 }.min(nz);
                (0..nz)
                    .map(|k| {
                        let s = k.saturating_sub(width / 2).min(nz - width);
                        (s, fd_weights(x[k], &x[s..s + width], m)[m].clone())
                    })
                    .collect()
            })
            .collect();
        let freqs = (0..spec.n_tan()).map(|t| spec.tangential_frequency(t)).collect();
        Self { spec: spec.clone(), stencils, freqs }
    }

    /// `D^alpha c` with `alpha` one count per axis, normal last (order at most 3).
    pub fn d(&self, c: &[C64], alpha: &[usize]) -> Vec<C64> {
        let spec = &self.spec;
        let n = spec.dim;
        let nz = spec.n_normal();
        let mut out = c.to_vec();
        if alpha[..n - 1].iter().any(|&a| a > 0) {
            let shape: Vec<usize> = spec.counts.iter().copied().chain(std::iter::once(nz)).collect();
            let axes: Vec<usize> = (0..n - 1).collect();
            fft_axes(&mut out, &shape, &axes, true);
            for (t, xi) in self.freqs.iter().enumerate() {
                let f = match xi {
                    Some(xi) => xi
                        .iter()
                        .zip(alpha)
                        .fold(C64::new(1.0, 0.0), |acc, (x, &m)| acc * (C64::new(0.0, *x)).powu(m as u32)),
                    None => C64::new(0.0, 0.0),
                };
                out[t * nz..(t + 1) * nz].iter_mut().for_each(|z| *z *= f);
            }
            fft_axes(&mut out, &shape, &axes, false);
        }
        let m = alpha[n - 1];
        if m > 0 {
            let st = &self.stencils[m - 1];
            let src = out.clone();
            for t in 0..spec.n_tan() {
                for k in 0..nz {
                    let (s, w) = &st[k];
                    out[t * nz + k] = w.iter().enumerate().map(|(i, wi)| *wi * src[t * nz + s + i]).sum();
                }
            }
        }
        out
    }

    /// First derivative along axis `axis`.
    pub fn d1(&self, c: &[C64], axis: usize) -> Vec<C64> {
        let mut a = vec![0; self.spec.dim];
        a[axis] = 1;
        self.d(c, &a)
    }

    /// Second derivative along axes `i` and `j`.
    pub fn d2(&self, c: &[C64], i: usize, j: usize) -> Vec<C64> {
        let mut a = vec![0; self.spec.dim];
        a[i] += 1;
        a[j] += 1;
        self.d(c, &a)
    }

    /// All derivatives of exact order `k` (multi-indices with `|alpha| = k`).
    pub fn all_of_order(&self, c: &[C64], k: usize) -> Vec<Vec<C64>> {
        multi_indices(self.spec.dim, k).iter().map(|a| self.d(c, a)).collect()
    }
}

/// Multi-indices of dimension `dim` and total order `k`.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    if dim == 1 {
        return vec![vec![k]];
    }
    (0..=k)
        .flat_map(|first| {
            multi_indices(dim - 1, k - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Quadrature weight of every grid point.
pub fn point_weights(spec: &GridSpec) -> Vec<f64> {
    let wt: f64 = spec.lengths.iter().zip(&spec.counts).map(|(l, c)| l / *c as f64).product();
    let wn = spec.normal.weights();
    (0..spec.n_tan()).flat_map(|_| wn.iter().map(move |w| w * wt)).collect()
}

/// `(sum_points w |v|^q)^{1/q}` where `|v|` is the Euclidean norm over the
/// given components.
pub fn lq_norm(comps: &[&[C64]], weights: &[f64], q: f64) -> f64 {
    let mut s = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let v2: f64 = comps.iter().map(|c| c[i].norm_sqr()).sum();
        s += w * v2.powf(q / 2.0);
    }
    s.powf(1.0 / q)
}

/// Sampled `(u, p, Q)`. Components are stored as flat arrays indexed by
/// `t * n_normal + k`; `Q` holds all `N^2` entries, `q[j * N + k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub normal: Vec<f64>,
    pub u: Vec<Vec<C64>>,
    pub p: Vec<C64>,
    pub q: Vec<Vec<C64>>,
}

impl FieldGrid {
    pub fn zeros(spec: &GridSpec) -> Self {
        let n = spec.n_points();
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            spec: spec.clone(),
            normal: spec.normal.points(),
            u: vec![z.clone(); spec.dim],
            p: z.clone(),
            q: vec![z; spec.dim * spec.dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn index(&self, t: usize, k: usize) -> usize {
        t * self.normal.len() + k
    }

    /// Largest absolute value over all components.
    pub fn max_abs(&self) -> f64 {
        self.components().flat_map(|c| c.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part over all components.
    pub fn max_imag(&self) -> f64 {
        self.components().flat_map(|c| c.iter()).map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn components(&self) -> impl Iterator<Item = &Vec<C64>> {
        self.u.iter().chain(std::iter::once(&self.p)).chain(self.q.iter())
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut Vec<C64>> {
        self.u.iter_mut().chain(std::iter::once(&mut self.p)).chain(self.q.iter_mut())
    }

    /// `self + s * other`, component by component.
    pub fn axpy(&mut self, s: C64, other: &FieldGrid) {
        for (a, b) in self.components_mut().zip(other.components()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn scale(&mut self, s: C64) {
        for c in self.components_mut() {
            c.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Largest difference to `other` over velocity and `Q` components.
    pub fn max_diff_uq(&self, other: &FieldGrid) -> f64 {
        self.u
            .iter()
            .chain(self.q.iter())
            .zip(other.u.iter().chain(other.q.iter()))
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_uq(&self) -> f64 {
        self.u.iter().chain(self.q.iter()).flat_map(|c| c.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Writes real parts as little-endian `f64` in component order
    /// `u_1..u_N, p, Q` (upper triangle, row-major) plus a JSON sidecar.
    pub fn write(&self, base: &Path) -> Result<()> {
        let n = self.dim();
        let mut bytes = Vec::with_capacity(8 * self.spec.n_points() * (n + 1 + n * (n + 1) / 2));
        let mut names = Vec::new();
        let mut push = |name: String, c: &Vec<C64>| {
            names.push(name);
            for z in c {
                bytes.extend_from_slice(&z.re.to_le_bytes());
            }
        };
        for j in 0..n {
            push(format!("u{}", j + 1), &self.u[j]);
        }
        push("p".into(), &self.p);
        for j in 0..n {
            for k in j..n {
                push(format!("Q{}{}", j + 1, k + 1), &self.q[j * n + k]);
            }
        }
        std::fs::write(base.with_extension("bin"), bytes)?;
        let meta = FieldMeta {
            schema_version: crate::SCHEMA_VERSION,
            grid: self.spec.clone(),
            normal_points: self.normal.clone(),
            components: names,
            layout: "component-major; within a component, tangential index (row-major) then normal index".into(),
            max_imag: self.max_imag(),
        };
        std::fs::write(base.with_extension("json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a field written by [`FieldGrid::write`].
    pub fn read(base: &Path) -> Result<Self> {
        let meta: FieldMeta = serde_json::from_str(&std::fs::read_to_string(base.with_extension("json"))?)?;
        let bytes = std::fs::read(base.with_extension("bin"))?;
        let mut f = FieldGrid::zeros(&meta.grid);
        let n = f.dim();
        let np = meta.grid.n_points();
        if bytes.len() != 8 * np * meta.components.len() {
            return Err(Error::Io("field payload size does not match its sidecar".into()));
        }
        let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = || -> Vec<C64> { (0..np).map(|_| C64::new(vals.next().unwrap(), 0.0)).collect() };
        for j in 0..n {
            f.u[j] = take();
        }
        f.p = take();
        for j in 0..n {
            for k in j..n {
                let c = take();
                f.q[k * n + j] = c.clone();
                f.q[j * n + k] = c;
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FieldMeta {
    schema_version: u32,
    grid: GridSpec,
    normal_points: Vec<f64>,
    components: Vec<String>,
    layout: String,
    max_imag: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip() {
        let shape = [4, 6];
        let orig: Vec<C64> = (0..24).map(|i| C64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut d = orig.clone();
        fft_axes(&mut d, &shape, &[0, 1], true);
        fft_axes(&mut d, &shape, &[0, 1], false);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn differentiator_matches_analytic() {
        let spec = GridSpec::new(2, 32, 2.0 * PI, NormalSpec::Stretched { n: 400, x_max: 10.0, stretch: 2.0 });
        let x = spec.normal.points();
        let nz = x.len();
        let f: Vec<C64> = (0..spec.n_points())
            .map(|i| {
                let (t, k) = (i / nz, i % nz);
                let y = spec.tangential_coords(t)[0];
                C64::new((2.0 * y).sin() * (-x[k]).exp(), 0.0)
            })
            .collect();
        let d = Differentiator::new(&spec);
        let g = d.d(&f, &[1, 1]);
        let h = d.d(&f, &[0, 3]);
        for i in 0..spec.n_points() {
            let (t, k) = (i / nz, i % nz);
            let y = spec.tangential_coords(t)[0];
            let e = -2.0 * (2.0 * y).cos() * (-x[k]).exp();
            assert!((g[i].re - e).abs() < 1e-4, "{i}");
            let e3 = -(2.0 * y).sin() * (-x[k]).exp();
            assert!((h[i].re - e3).abs() < 1e-3, "{i} {} {}", h[i].re, e3);
        }
        assert_eq!(multi_indices(3, 2).len(), 6);
    }

    #[test]
    fn graded_grid_ends_at_x_max() {
        let x = NormalSpec::Graded { n: 50, x_max: 10.0, ratio: 1.05 }.points();
        assert_eq!(x[0], 0.0);
        assert!((x[49] - 10.0).abs() < 1e-12);
        assert!(x[2] - x[1] > x[1] - x[0]);
    }

    #[test]
    fn write_read_roundtrip() {
        let spec = GridSpec::new(3, 4, 2.0, NormalSpec::Uniform { n: 3, x_max: 1.0 });
        let mut f = FieldGrid::zeros(&spec);
        for (i, z) in f.p.iter_mut().enumerate() {
            *z = C64::new(i as f64, 0.0);
        }
        f.q[1] = vec![C64::new(2.5, 0.0); spec.n_points()];
        f.q[3] = f.q[1].clone();
        let dir = std::env::temp_dir().join(format!("halfspace-field-{}", std::process::id()));
        f.write(&dir).unwrap();
        let g = FieldGrid::read(&dir).unwrap();
        assert_eq!(f, g);
    }
}
