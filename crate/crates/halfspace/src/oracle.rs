//! Brute-force reference for one tangential mode: a second-order finite
//! difference discretisation of the mode ODE system on a truncated,
//! stretched interval, with the pressure on a staggered grid. Shares no
//! formula code with the amplitude assembly.
//!
//! The momentum equation is used in the reduced second-order form
//! `(lambda - c_beta Lap) u + grad p + beta lambda Div Q = f + beta Div G`,
//! obtained by substituting the `Q` equation into the third-order term.
//! All `N^2` entries of `Q` are carried as unknowns; symmetry and
//! tracelessness come out of the solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::params::ModelParams;
use crate::tensor::I;
use crate::C64;

const Z: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Stretched grid `x(s) = X (e^{k s} - 1) / (e^k - 1)` on `s in [0, 1]`,
/// `n` intervals; `stretch = 0` is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedGrid {
    pub x_max: f64,
    pub n: usize,
    pub stretch: f64,
}

impl StretchedGrid {
    /// `(x, x', x'')` at `s`.
    pub fn map(&self, s: f64) -> (f64, f64, f64) {
        let (x, k) = (self.x_max, self.stretch);
        if k.abs() < 1e-12 {
            return (x * s, x, 0.0);
        }
        let d = k.exp_m1();
        let e = (k * s).exp();
        (x * (e - 1.0) / d, x * k * e / d, x * k * k * e / d)
    }

    /// Node positions `x_0 = 0, ..., x_n = X`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.map(i as f64 / self.n as f64).0).collect()
    }

    /// Staggered positions `x_{i+1/2}`, `i = 0..n`.
    pub fn half_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.map((i as f64 + 0.5) / self.n as f64).0).collect()
    }

    /// Grid with twice as many intervals; node `i` of `self` is node `2i`.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }
}

/// Nodal solution of the discrete mode problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleProfile {
    pub x: Vec<f64>,
    pub x_half: Vec<f64>,
    /// `u[i][j]`: component `j` at node `i`.
    pub u: Vec<Vec<C64>>,
    /// `q[i][j * N + k]`.
    pub q: Vec<Vec<C64>>,
    /// Pressure at the staggered nodes.
    pub p_half: Vec<C64>,
}

impl OracleProfile {
    /// Pressure at the nodes: averages of neighbouring staggered values,
    /// linear extrapolation at the wall, zero at the far end.
    pub fn p_nodes(&self) -> Vec<C64> {
        let n = self.x.len() - 1;
        let ph = &self.p_half;
        let mut p = vec![Z; n + 1];
        for i in 1..n {
            p[i] = 0.5 * (ph[i - 1] + ph[i]);
        }
        if n >= 2 {
            let w = (self.x[0] - self.x_half[0]) / (self.x_half[1] - self.x_half[0]);
            p[0] = ph[0] + w * (ph[1] - ph[0]);
        }
        p
    }
}

/// Assembled and factored discrete mode operator at fixed `(lambda, xi')`.
#[derive(Debug, Clone)]
pub struct TruncatedBvp {
    pub dim: usize,
    pub lambda: C64,
    pub xi: Vec<f64>,
    pub grid: StretchedGrid,
    beta: f64,
    /// `(x', x'')` at the nodes.
    jac: Vec<(f64, f64)>,
    matrix: BandMatrix,
    unfactored: BandMatrix,
    row_scale: Vec<f64>,
}

struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn u(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }
    fn q(&self, i: usize, j: usize, k: usize) -> usize {
        i * self.m + self.n + j * self.n + k
    }
    fn p(&self, i: usize) -> usize {
        i * self.m + self.m - 1
    }
}

impl TruncatedBvp {
    /// Assembles and factors the operator. Fails with
    /// `SingularDiscretization` when a pivot vanishes.
    pub fn new(params: &ModelParams, lambda: C64, xi: &[f64], grid: StretchedGrid) -> Result<Self> {
        let dim = xi.len() + 1;
        if grid.n < 4 || !(grid.x_max > 0.0) {
            return Err(Error::InvalidInput("truncated problem needs at least 4 intervals and X > 0".into()));
        }
        let n = grid.n;
        let lay = Layout { n: dim, m: dim + dim * dim + 1 };
        let m = lay.m;
        let ds = 1.0 / n as f64;
        let jac: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let (_, d1, d2) = grid.map(i as f64 * ds);
                (d1, d2)
            })
            .collect();
        let jac_half: Vec<f64> = (0..n).map(|i| grid.map((i as f64 + 0.5) * ds).1).collect();
        let size = (n + 1) * m;
        let mut a = BandMatrix::new(size, 2 * m, 2 * m);
        let a2: f64 = xi.iter().map(|v| v * v).sum();
        let ix: Vec<C64> = xi.iter().map(|v| I * *v).collect();
        let beta = params.beta;
        let cb = 1.0 + 0.5 * beta * beta;
        // weights of u_{i-1}, u_i, u_{i+1} for D and D^2 at node i
        let d1w = |i: usize| {
            let (j1, _) = jac[i];
            let c = 1.0 / (2.0 * ds * j1);
            [-c, 0.0, c]
        };
        let d2w = |i: usize| {
            let (j1, j2) = jac[i];
            let c2 = 1.0 / (ds * ds * j1 * j1);
            let c1 = j2 / (j1 * j1 * j1 * 2.0 * ds);
            [c2 + c1, -2.0 * c2, c2 - c1]
        };
        for i in 0..=n {
            if i == n {
                for c in 0..m {
                    a.add(i * m + c, i * m + c, ONE);
                }
                continue;
            }
            // velocity rows
            if i == 0 {
                for j in 0..dim {
                    a.add(lay.u(0, j), lay.u(0, j), ONE);
                }
            } else {
                let (w1, w2) = (d1w(i), d2w(i));
                let dp = 1.0 / (ds * jac[i].0);
                for j in 0..dim {
                    let r = lay.u(i, j);
                    a.add(r, lay.u(i, j), lambda + cb * a2);
                    for (o, w) in w2.iter().enumerate() {
                        a.add(r, lay.u(i + o - 1, j), C64::from(-cb * w));
                    }
                    if j < dim - 1 {
                        a.add(r, lay.p(i - 1), 0.5 * ix[j]);
                        a.add(r, lay.p(i), 0.5 * ix[j]);
                    } else {
                        a.add(r, lay.p(i - 1), C64::from(-dp));
                        a.add(r, lay.p(i), C64::from(dp));
                    }
                    for k in 0..dim - 1 {
                        a.add(r, lay.q(i, j, k), beta * lambda * ix[k]);
                    }
                    for (o, w) in w1.iter().enumerate() {
                        if *w != 0.0 {
                            a.add(r, lay.q(i + o - 1, j, dim - 1), beta * lambda * *w);
                        }
                    }
                }
            }
            // Q rows: (lambda + a + A^2) Q - D^2 Q - beta/2 (grad u + grad u^T) = G
            for j in 0..dim {
                for k in 0..dim {
                    let r = lay.q(i, j, k);
                    a.add(r, lay.q(i, j, k), lambda + params.a + a2);
                    if i == 0 {
                        // ghost node from D Q(0) = H: Q_{-1} = Q_1 - 2 ds x'_0 H
                        let (j1, _) = jac[0];
                        let c2 = 1.0 / (ds * ds * j1 * j1);
                        a.add(r, lay.q(0, j, k), C64::from(2.0 * c2));
                        a.add(r, lay.q(1, j, k), C64::from(-2.0 * c2));
                    } else {
                        for (o, w) in d2w(i).iter().enumerate() {
                            a.add(r, lay.q(i + o - 1, j, k), C64::from(-w));
                        }
                    }
                    for (jj, kk) in [(j, k), (k, j)] {
                        // -beta/2 d_kk u_jj
                        if kk < dim - 1 {
                            a.add(r, lay.u(i, jj), -0.5 * beta * ix[kk]);
                        } else if i == 0 {
                            let c = 1.0 / (2.0 * ds * jac[0].0);
                            a.add(r, lay.u(0, jj), C64::from(0.5 * beta * 3.0 * c));
                            a.add(r, lay.u(1, jj), C64::from(-0.5 * beta * 4.0 * c));
                            a.add(r, lay.u(2, jj), C64::from(0.5 * beta * c));
                        } else {
                            for (o, w) in d1w(i).iter().enumerate() {
                                if *w != 0.0 {
                                    a.add(r, lay.u(i + o - 1, jj), C64::from(-0.5 * beta * w));
                                }
                            }
                        }
                    }
                }
            }
            // divergence at the staggered node i + 1/2
            let r = lay.p(i);
            let c = 1.0 / (ds * jac_half[i]);
            for k in 0..dim - 1 {
                a.add(r, lay.u(i, k), 0.5 * ix[k]);
                a.add(r, lay.u(i + 1, k), 0.5 * ix[k]);
            }
            a.add(r, lay.u(i, dim - 1), C64::from(-c));
            a.add(r, lay.u(i + 1, dim - 1), C64::from(c));
        }
        if a2 == 0.0 {
            // Without tangential frequency the pressure enters only through
            // its normal derivative and the divergence rows telescope: trade
            // the last one for the gauge p_{n-1/2} = 0.
            let r = lay.p(n - 1);
            for c in [lay.u(n - 1, dim - 1), lay.u(n, dim - 1)] {
                let v = a.get(r, c);
                a.add(r, c, -v);
            }
            a.add(r, r, ONE);
        }
        // row equilibration
        let row_scale: Vec<f64> = (0..size)
            .map(|r| {
                let lo = r.saturating_sub(2 * m);
                let hi = (r + 2 * m).min(size - 1);
                let s = (lo..=hi).map(|c| a.get(r, c).norm()).fold(0.0, f64::max);
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = BandMatrix::new(size, 2 * m, 2 * m);
        for r in 0..size {
            let lo = r.saturating_sub(2 * m);
            let hi = (r + 2 * m).min(size - 1);
            for c in lo..=hi {
                let v = a.get(r, c);
                if v != Z {
                    scaled.add(r, c, v * row_scale[r]);
                }
            }
        }
        let unfactored = scaled.clone();
        scaled.factor()?;
        // reject numerically singular factorizations
        let tiny = (0..size).map(|k| scaled.get(k, k).norm()).fold(f64::INFINITY, f64::min);
        if tiny < 1e-14 * unfactored.norm_inf() {
            let row = (0..size).position(|k| scaled.get(k, k).norm() == tiny).unwrap_or(0);
            return Err(Error::SingularDiscretization { row });
        }
        Ok(Self { dim, lambda, xi: xi.to_vec(), grid, beta, jac, matrix: scaled, unfactored, row_scale })
    }

    /// Solves with traces `h`, `hq` (`hq[j * N + k]`) and optional nodal
    /// forcing `f[i][j]`, `g[i][j * N + k]`.
    pub fn solve(&self, h: &[C64], hq: &[C64], f: Option<&[Vec<C64>]>, g: Option<&[Vec<C64>]>) -> OracleProfile {
        let dim = self.dim;
        let n = self.grid.n;
        let lay = Layout { n: dim, m: dim + dim * dim + 1 };
        let ds = 1.0 / n as f64;
        let ix: Vec<C64> = self.xi.iter().map(|v| I * *v).collect();
        let mut b = vec![Z; (n + 1) * lay.m];
        for j in 0..dim {
            b[lay.u(0, j)] = h[j];
        }
        // ghost-node contribution of the Neumann data at the wall
        let (j1, j2) = self.jac[0];
        for j in 0..dim {
            for k in 0..dim {
                let hv = hq[j * dim + k];
                // -D^2 Q contains H (2 / (ds x'_0) + x''_0 / x'_0^2), moved to the right side
                b[lay.q(0, j, k)] -= hv * (2.0 / (ds * j1) + j2 / (j1 * j1));
            }
        }
        if let Some(f) = f {
            for i in 1..n {
                for j in 0..dim {
                    b[lay.u(i, j)] += f[i][j];
                }
            }
        }
        if let Some(g) = g {
            for i in 0..n {
                for j in 0..dim {
                    for k in 0..dim {
                        b[lay.q(i, j, k)] += g[i][j * dim + k];
                    }
                }
            }
            // beta Div G in the momentum rows
            for i in 1..n {
                let c = 1.0 / (2.0 * ds * self.jac[i].0);
                for j in 0..dim {
                    let mut d = (g[i + 1][j * dim + dim - 1] - g[i - 1][j * dim + dim - 1]) * c;
                    for k in 0..dim - 1 {
                        d += ix[k] * g[i][j * dim + k];
                    }
                    b[lay.u(i, j)] += self.beta * d;
                }
            }
        }
        for (v, s) in b.iter_mut().zip(&self.row_scale) {
            *v *= *s;
        }
        self.matrix.solve(&mut b);
        OracleProfile {
            x: self.grid.nodes(),
            x_half: self.grid.half_nodes(),
            u: (0..=n).map(|i| (0..dim).map(|j| b[lay.u(i, j)]).collect()).collect(),
            q: (0..=n).map(|i| (0..dim * dim).map(|c| b[lay.q(i, c / dim, c % dim)]).collect()).collect(),
            p_half: (0..n).map(|i| b[lay.p(i)]).collect(),
        }
    }

    /// Smallest singular value of the row-equilibrated operator, by inverse
    /// iteration on `M^H M`.
    pub fn smallest_singular_value(params: &ModelParams, lambda: C64, xi: &[f64], grid: StretchedGrid) -> Result<f64> {
        let op = TruncatedBvp::new(params, lambda, xi, grid)?;
        let size = op.matrix.n();
        let mut adj = op.unfactored.adjoint();
        adj.factor()?;
        let mut v: Vec<C64> = (0..size).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.1)).collect();
        let mut sigma = f64::INFINITY;
        for _ in 0..60 {
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= nrm);
            let mut w = v.clone();
            adj.solve(&mut w);
            op.matrix.solve(&mut w);
            let growth = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let next = 1.0 / growth.sqrt();
            let done = (next - sigma).abs() < 1e-6 * next;
            sigma = next;
            v = w;
            if done {
                break;
            }
        }
        Ok(sigma)
    }
}

/// Oracle solve plus a Richardson estimate of its own discretisation error:
/// the largest nodal difference between the `n` and `2n` solutions, times 4/3.
pub fn oracle_mode_solve(
    params: &ModelParams,
    lambda: C64,
    xi: &[f64],
    h: &[C64],
    hq: &[C64],
    grid: StretchedGrid,
) -> Result<(OracleProfile, f64)> {
    if grid.n < 512 {
        return Err(Error::InvalidInput("oracle solves need at least 512 intervals".into()));
    }
    let coarse = TruncatedBvp::new(params, lambda, xi, grid)?.solve(h, hq, None, None);
    let fine = TruncatedBvp::new(params, lambda, xi, grid.refined())?.solve(h, hq, None, None);
    let mut err: f64 = 0.0;
    for i in 0..coarse.u.len() {
        for (a, b) in coarse.u[i].iter().chain(&coarse.q[i]).zip(fine.u[2 * i].iter().chain(&fine.q[2 * i])) {
            err = err.max((a - b).norm());
        }
    }
    Ok((coarse, err * 4.0 / 3.0))
}
