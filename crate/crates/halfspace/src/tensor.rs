//! Fixed-size complex vectors and matrices for dimension at most three.

use crate::C64;

pub type Vec3 = [C64; 3];
pub type Mat3 = [[C64; 3]; 3];

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn zero_vec() -> Vec3 {
    [ZERO; 3]
}

pub fn zero_mat() -> Mat3 {
    [[ZERO; 3]; 3]
}

/// Symbol of the gradient acting on `exp(i xi'.x' - g x_N)`: `(i xi', -g)`.
pub fn kappa(xi: &[f64], g: C64, dim: usize) -> Vec3 {
    let mut k = zero_vec();
    for (j, x) in xi.iter().enumerate().take(dim - 1) {
        k[j] = I * *x;
    }
    k[dim - 1] = -g;
    k
}

pub fn vec_norm(v: &Vec3, dim: usize) -> f64 {
    v[..dim].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn mat_norm(m: &Mat3, dim: usize) -> f64 {
    m[..dim].iter().flat_map(|r| r[..dim].iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &Mat3, dim: usize) -> C64 {
    (0..dim).map(|j| m[j][j]).sum()
}

/// Largest entry of `m - m^T`.
pub fn asymmetry(m: &Mat3, dim: usize) -> f64 {
    let mut e: f64 = 0.0;
    for j in 0..dim {
        for k in 0..dim {
            e = e.max((m[j][k] - m[k][j]).norm());
        }
    }
    e
}

pub fn scale_vec(v: &Vec3, s: C64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

pub fn scale_mat(m: &Mat3, s: C64) -> Mat3 {
    let mut o = *m;
    for r in o.iter_mut() {
        for z in r.iter_mut() {
            *z *= s;
        }
    }
    o
}

pub fn add_vec(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn add_mat(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut o = *a;
    for j in 0..3 {
        for k in 0..3 {
            o[j][k] += b[j][k];
        }
    }
    o
}
