use std::f64::consts::PI;

use halfspace::evolution::{nonlinearity_eval, vortex_initial_data, NonlinearityParams};
use halfspace::field::{FieldGrid, GridSpec, NormalSpec};
use halfspace::{ModelParams, C64};
use proptest::prelude::*;

fn spec(dim: usize) -> GridSpec {
    GridSpec::new(dim, if dim == 2 { 16 } else { 8 }, 2.0 * PI, NormalSpec::Uniform { n: 24, x_max: 8.0 })
}

/// Vortex data plus a symmetric traceless perturbation of `Q`.
fn field(dim: usize, amp: f64, skew: f64) -> FieldGrid {
    let s = spec(dim);
    let center: Vec<f64> = s.lengths.iter().map(|l| 0.5 * l).chain(std::iter::once(3.0)).collect();
    let mut f = vortex_initial_data(&s, &center, 0.8, amp);
    let x = s.normal.points();
    for t in 0..s.n_tan() {
        let x1 = s.tangential_coords(t)[0];
        for (k, &xn) in x.iter().enumerate() {
            let v = C64::new(skew * x1.sin() * (-xn).exp(), 0.0);
            let i = f.index(t, k);
            f.q[1][i] += v;
            f.q[dim][i] += v;
        }
    }
    f
}

#[allow(clippy::needless_range_loop)]
fn asymmetry(g: &[Vec<C64>], dim: usize) -> (f64, f64, f64) {
    let np = g[0].len();
    let (mut sym, mut tr, mut scale): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..np {
        let mut t = C64::new(0.0, 0.0);
        for j in 0..dim {
            t += g[j * dim + j][i];
            for k in 0..dim {
                sym = sym.max((g[j * dim + k][i] - g[k * dim + j][i]).norm());
                scale = scale.max(g[j * dim + k][i].norm());
            }
        }
        tr = tr.max(t.norm());
    }
    (sym, tr, scale)
}

#[test]
fn zero_state_has_zero_nonlinearity() {
    for dim in [2, 3] {
        let p = ModelParams { dim, ..ModelParams::default() };
        let out = nonlinearity_eval(&FieldGrid::zeros(&spec(dim)), &NonlinearityParams::from_model(&p));
        assert!(out.f.iter().chain(&out.g).flatten().all(|z| z.norm() == 0.0));
    }
}

#[test]
fn velocity_only_forcing_is_quadratic() {
    let p = ModelParams::default();
    let nl = NonlinearityParams::from_model(&p);
    let mut f = field(2, 1.0, 0.0);
    f.q.iter_mut().for_each(|c| c.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0)));
    let once = nonlinearity_eval(&f, &nl);
    f.scale(C64::new(2.0, 0.0));
    let twice = nonlinearity_eval(&f, &nl);
    for (a, b) in once.f.iter().flatten().zip(twice.f.iter().flatten()) {
        assert!((4.0 * a - b).norm() < 1e-12 * (1.0 + b.norm()));
    }
    assert!(twice.g.iter().flatten().all(|z| z.norm() < 1e-14));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tensor_forcing_is_symmetric_and_traceless(dim in 2usize..=3, amp in 0.01f64..2.0, skew in -1.0f64..1.0, beta in 0.1f64..2.0) {
        let p = ModelParams { dim, beta, ..ModelParams::default() };
        let out = nonlinearity_eval(&field(dim, amp, skew), &NonlinearityParams::from_model(&p));
        let (sym, tr, scale) = asymmetry(&out.g, dim);
        prop_assert!(sym <= 1e-12 * scale.max(1.0), "asymmetry {sym:e}");
        prop_assert!(tr <= 1e-12 * scale.max(1.0), "trace {tr:e}");
    }
}
