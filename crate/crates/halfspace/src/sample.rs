//! Deterministic random samples of modes and boundary data.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::BoundaryModeData;
use crate::field::{FieldGrid, GridSpec};
use crate::params::ModelParams;
use crate::resolvent::BoundaryFields;
use crate::tensor::zero_mat;
use crate::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// `lambda` in the sector with `|lambda|` log-uniform in `[r_min, r_max]`
/// and the angle drawn strictly inside the opening.
pub fn sector_lambda(rng: &mut ChaCha8Rng, params: &ModelParams, r_min: f64, r_max: f64) -> C64 {
    let opening = std::f64::consts::PI - params.theta;
    let radius = log_uniform(rng, r_min.max(params.r * 1.0001), r_max);
    let angle = rng.gen_range(-opening..opening) * 0.999;
    C64::from_polar(radius, angle)
}

/// Tangential frequency with `|xi'|` log-uniform in `[lo, hi]` and a random direction.
pub fn tangential_frequency(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mag = log_uniform(rng, lo, hi);
    let mut v: Vec<f64> = (0..dim - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x *= mag / n);
    v
}

/// Random admissible boundary data: `h_N = 0`, `H` symmetric and traceless.
pub fn boundary_data(rng: &mut ChaCha8Rng, dim: usize) -> BoundaryModeData {
    let mut c = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut d = BoundaryModeData::zero();
    for j in 0..dim - 1 {
        d.h[j] = c();
    }
    let mut hq = zero_mat();
    for j in 0..dim {
        for k in j..dim {
            let v = c();
            hq[j][k] = v;
            hq[k][j] = v;
        }
    }
    let tr: C64 = (0..dim).map(|j| hq[j][j]).sum::<C64>() / dim as f64;
    for j in 0..dim {
        hq[j][j] -= tr;
    }
    d.hq = hq;
    d
}

/// Smooth periodic boundary fields built from the tangential modes with
/// integer wave numbers `|k_i| <= max_wave`, random coefficients decaying
/// like `1 / (1 + |k|^2)`, `h_N = 0` and `H` symmetric traceless.
pub fn smooth_boundary_fields(rng: &mut ChaCha8Rng, spec: &GridSpec, max_wave: i32) -> BoundaryFields {
    let n = spec.dim;
    let mut b = BoundaryFields::zeros(spec);
    let waves: Vec<Vec<i32>> = (0..n - 1).fold(vec![vec![]], |acc, _| {
        acc.into_iter().flat_map(|w| (-max_wave..=max_wave).map(move |k| [w.clone(), vec![k]].concat())).collect()
    });
    for k in waves {
        let k2: f64 = k.iter().map(|v| (*v as f64).powi(2)).sum();
        let amp = 1.0 / (1.0 + k2);
        let d = boundary_data(rng, n);
        for t in 0..spec.n_tan() {
            let x = spec.tangential_coords(t);
            let phase: f64 = k
                .iter()
                .zip(&x)
                .zip(&spec.lengths)
                .map(|((k, x), l)| 2.0 * std::f64::consts::PI * *k as f64 * x / l)
                .sum();
            let e = C64::from_polar(amp, phase);
            for j in 0..n - 1 {
                b.h[j][t] += (d.h[j] * e).re;
            }
            for j in 0..n {
                for l in 0..n {
                    b.hq[j * n + l][t] += (d.hq[j][l] * e).re;
                }
            }
        }
    }
    b
}

/// Random smooth interior state: every component of `u` and of a symmetric
/// traceless `Q` is a sum of three tangential waves with random phases,
/// damped like `exp(-s x_N)` with a random `s` in `[0.2, 1]`.
pub fn random_field(rng: &mut ChaCha8Rng, spec: &GridSpec) -> FieldGrid {
    let n = spec.dim;
    let x = spec.normal.points();
    let mut f = FieldGrid::zeros(spec);
    let component = |rng: &mut ChaCha8Rng| {
        let waves: Vec<(Vec<f64>, f64, f64)> = (1..=3)
            .map(|k| {
                let dir: Vec<f64> = spec
                    .lengths
                    .iter()
                    .map(|l| 2.0 * PI * k as f64 * rng.gen_range(-1.0..1.0f64).round() / l)
                    .collect();
                (dir, rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let decay = rng.gen_range(0.2..1.0);
        let mut v = vec![C64::new(0.0, 0.0); spec.n_tan() * x.len()];
        for t in 0..spec.n_tan() {
            let xt = spec.tangential_coords(t);
            for (k, &xn) in x.iter().enumerate() {
                let s: f64 = waves
                    .iter()
                    .map(|(dir, phase, amp)| amp * (dir.iter().zip(&xt).map(|(d, y)| d * y).sum::<f64>() + phase).cos())
                    .sum();
                v[t * x.len() + k] = C64::new(s * (-decay * xn).exp(), 0.0);
            }
        }
        v
    };
    for j in 0..n {
        f.u[j] = component(rng);
    }
    for j in 0..n {
        for l in j..n {
            let v = component(rng);
            f.q[j * n + l] = v.clone();
            f.q[l * n + j] = v;
        }
    }
    let np = f.q[0].len();
    for i in 0..np {
        let tr: C64 = (0..n).map(|j| f.q[j * n + j][i]).sum::<C64>() / n as f64;
        for j in 0..n {
            f.q[j * n + j][i] -= tr;
        }
    }
    f
}
