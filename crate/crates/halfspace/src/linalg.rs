//! Linear solvers: a labelled sparse-row builder solved densely with
//! partial pivoting, and a complex banded LU for long finite-difference
//! systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Square system assembled row by row, each row tagged with the relation it encodes.
#[derive(Debug, Clone, Default)]
pub struct RowSystem {
    ncols: usize,
    rows: Vec<Vec<(usize, C64)>>,
    rhs: Vec<C64>,
    labels: Vec<&'static str>,
}

impl RowSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves `len` consecutive unknowns and returns the first index.
    pub fn block(&mut self, len: usize) -> usize {
        let start = self.ncols;
        self.ncols += len;
        start
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&mut self, label: &'static str, coeffs: &[(usize, C64)], rhs: C64) {
        self.rows.push(coeffs.to_vec());
        self.rhs.push(rhs);
        self.labels.push(label);
    }

    /// Replaces the row at `index`.
    pub fn replace_row(&mut self, index: usize, label: &'static str, coeffs: &[(usize, C64)], rhs: C64) {
        self.rows[index] = coeffs.to_vec();
        self.rhs[index] = rhs;
        self.labels[index] = label;
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::<C64>::zeros(self.rows.len(), self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, c) in r {
                m[(i, j)] += c;
            }
        }
        m
    }

    /// Solves the square system by LU with partial pivoting.
    pub fn solve(&self) -> Result<Vec<C64>> {
        if self.rows.len() != self.ncols {
            return Err(Error::InvalidInput(format!(
                "system has {} rows for {} unknowns",
                self.rows.len(),
                self.ncols
            )));
        }
        let m = self.to_dense();
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lu = m.lu();
        let pivot = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if !(pivot > 1e-14 * scale) {
            return Err(Error::SingularSystem { pivot: pivot / scale });
        }
        let b = DVector::from_column_slice(&self.rhs);
        let x = lu.solve(&b).ok_or(Error::SingularSystem { pivot: 0.0 })?;
        Ok(x.iter().copied().collect())
    }

    /// Residual per label: largest `|row sum|` over the largest term magnitude
    /// among rows sharing the label, in first-seen order.
    pub fn residuals_by_label(&self, x: &[C64]) -> Vec<(&'static str, f64)> {
        let mut acc: Vec<(&'static str, f64, f64)> = Vec::new();
        for ((r, rhs), label) in self.rows.iter().zip(&self.rhs).zip(&self.labels) {
            let mut s = -rhs;
            let mut mag = rhs.norm();
            for &(j, c) in r {
                s += c * x[j];
                mag = mag.max((c * x[j]).norm());
            }
            match acc.iter_mut().find(|e| e.0 == *label) {
                Some(e) => {
                    e.1 = e.1.max(s.norm());
                    e.2 = e.2.max(mag);
                }
                None => acc.push((label, s.norm(), mag)),
            }
        }
        acc.into_iter().map(|(l, r, m)| (l, if m > 0.0 { r / m } else { 0.0 })).collect()
    }
}

/// Complex banded matrix with `kl` sub- and `ku` super-diagonals, factored
/// in place by Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        // room for the fill-in produced by row interchanges
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![C64::new(0.0, 0.0); n * width], pivots: vec![0; n], factored: false }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "entry ({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if j + self.kl >= i && j <= i + self.kl + self.ku {
            self.data[self.idx(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Adds `v` to entry `(i, j)`, which must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Conjugate transpose, as a new band matrix.
    pub fn adjoint(&self) -> BandMatrix {
        assert!(!self.factored);
        let mut t = BandMatrix::new(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j);
                if v != C64::new(0.0, 0.0) {
                    t.add(j, i, v.conj());
                }
            }
        }
        t
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).norm()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let span = self.kl + self.ku;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].norm();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularDiscretization { row: k });
            }
            self.pivots[k] = p;
            let jmax = (k + span).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / piv;
                self.data[ik] = l;
                if l != C64::new(0.0, 0.0) {
                    for j in k + 1..=jmax {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` after [`BandMatrix::factor`].
    pub fn solve(&self, b: &mut [C64]) {
        assert!(self.factored, "factor() must be called before solve()");
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.data[self.idx(i, k)] * bk;
            }
        }
        let span = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + span).min(n - 1) {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn band_solve_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (40, 3, 2);
        let mut band = BandMatrix::new(n, kl, ku);
        let mut dense = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal forces row interchanges
                let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * if i == j { 0.01 } else { 1.0 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let mut x = b.clone();
        band.factor().unwrap();
        band.solve(&mut x);
        let r = &dense * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn row_system_solves() {
        let mut s = RowSystem::new();
        let x = s.block(2);
        s.row("a", &[(x, C64::new(2.0, 0.0)), (x + 1, C64::new(1.0, 0.0))], C64::new(3.0, 0.0));
        s.row("b", &[(x, C64::new(1.0, 0.0)), (x + 1, C64::new(-1.0, 0.0))], C64::new(0.0, 0.0));
        let sol = s.solve().unwrap();
        assert!((sol[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(s.residuals_by_label(&sol).iter().all(|r| r.1 < 1e-15));
    }
}
