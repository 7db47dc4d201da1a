use std::f64::consts::PI;

use halfspace::assembly::{solve_mode, BoundaryModeData};
use halfspace::field::{FieldGrid, GridSpec, NormalSpec};
use halfspace::profile::eval_profile;
use halfspace::resolvent::{
    pressure_agreement, solve_boundary, solve_boundary_modes, solve_resolvent_full, BoundaryFields, InteriorData,
};
use halfspace::sample;
use halfspace::{ModelParams, C64};

fn spec(dim: usize, count: usize) -> GridSpec {
    GridSpec::new(dim, count, 2.0 * PI, NormalSpec::Uniform { n: 96, x_max: 16.0 })
}

fn lambda() -> C64 {
    C64::new(3.0, 2.0)
}

fn diff(a: &FieldGrid, b: &FieldGrid) -> f64 {
    a.components()
        .zip(b.components())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

#[test]
fn zero_traces_give_zero_field() {
    let p = ModelParams::default();
    let s = spec(2, 16);
    let f = solve_boundary(&p, lambda(), &BoundaryFields::zeros(&s), &s).unwrap();
    assert_eq!(f.max_abs(), 0.0);
}

#[test]
fn single_wave_reproduces_its_mode_profile() {
    let p = ModelParams::default();
    let s = spec(2, 16);
    let mut d = BoundaryModeData::zero();
    d.h[0] = C64::new(0.7, -0.2);
    d.hq[0][0] = C64::new(0.3, 0.1);
    d.hq[1][1] = C64::new(-0.3, -0.1);
    d.hq[0][1] = C64::new(0.5, 0.0);
    d.hq[1][0] = C64::new(0.5, 0.0);
    let mut b = BoundaryFields::zeros(&s);
    for t in 0..s.n_tan() {
        let e = C64::from_polar(1.0, s.tangential_coords(t)[0]);
        b.h[0][t] = d.h[0] * e;
        for (c, v) in [(0, d.hq[0][0]), (1, d.hq[0][1]), (2, d.hq[1][0]), (3, d.hq[1][1])] {
            b.hq[c][t] = v * e;
        }
    }
    let field = solve_boundary(&p, lambda(), &b, &s).unwrap();
    let prof = eval_profile(&solve_mode(&p, lambda(), &[1.0], &d).unwrap());
    let x = s.normal.points();
    let mut err: f64 = 0.0;
    for t in 0..s.n_tan() {
        let e = C64::from_polar(1.0, s.tangential_coords(t)[0]);
        for (k, &xx) in x.iter().enumerate() {
            let v = prof.value(xx);
            let i = field.index(t, k);
            err = err.max((field.u[0][i] - e * v.u[0]).norm()).max((field.u[1][i] - e * v.u[1]).norm());
            err = err.max((field.q[1][i] - e * v.q[0][1]).norm()).max((field.p[i] - e * v.p).norm());
        }
    }
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn real_traces_give_real_fields_that_meet_them() {
    for dim in [2, 3] {
        let p = ModelParams { dim, ..ModelParams::default() };
        let s = spec(dim, if dim == 2 { 16 } else { 8 });
        let b = sample::smooth_boundary_fields(&mut sample::rng(4), &s, 2);
        let modes = solve_boundary_modes(&p, C64::new(5.0, 0.0), &b, &s).unwrap();
        assert!(modes.report(&p).max_mode_residual < 1e-9);
        let f = modes.to_field();
        assert!(f.max_imag() < 1e-12 * f.max_abs(), "imaginary part {:e}", f.max_imag());
        for t in 0..s.n_tan() {
            for j in 0..dim {
                assert!((f.u[j][f.index(t, 0)] - b.h[j][t]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn solution_is_linear_in_the_data() {
    let p = ModelParams::default();
    let s = spec(2, 16);
    let b1 = sample::smooth_boundary_fields(&mut sample::rng(1), &s, 3);
    let b2 = sample::smooth_boundary_fields(&mut sample::rng(2), &s, 3);
    let c = C64::new(0.4, -1.3);
    let mut b = b2.clone();
    b.axpy(c, &b1);
    let mut expect = solve_boundary(&p, lambda(), &b2, &s).unwrap();
    expect.axpy(c, &solve_boundary(&p, lambda(), &b1, &s).unwrap());
    let got = solve_boundary(&p, lambda(), &b, &s).unwrap();
    assert!(diff(&got, &expect) < 1e-11 * expect.max_abs());
}

#[test]
fn decoupled_coupling_solves_on_the_grid() {
    let p = ModelParams { beta: 0.0, ..ModelParams::default() };
    let s = spec(2, 16);
    let b = sample::smooth_boundary_fields(&mut sample::rng(8), &s, 3);
    let modes = solve_boundary_modes(&p, lambda(), &b, &s).unwrap();
    assert!(modes.report(&p).max_mode_residual < 1e-10);
}

#[test]
fn interior_forcing_keeps_the_wall_traces() {
    let p = ModelParams::default();
    let s = spec(2, 16);
    let b = sample::smooth_boundary_fields(&mut sample::rng(6), &s, 2);
    let x = s.normal.points();
    let nz = x.len();
    let mut data = InteriorData::zeros(&s);
    for t in 0..s.n_tan() {
        let x1 = s.tangential_coords(t)[0];
        for (k, &xn) in x.iter().enumerate() {
            let bump = xn * xn * (-xn).exp();
            data.f[0][t * nz + k] = C64::new(bump * x1.sin(), 0.0);
            data.g[1][t * nz + k] = C64::new(bump * x1.cos(), 0.0);
            data.g[2][t * nz + k] = C64::new(bump * x1.cos(), 0.0);
        }
    }
    let f = solve_resolvent_full(&p, lambda(), &data, &b, &s).unwrap();
    let without = solve_resolvent_full(&p, lambda(), &InteriorData::zeros(&s), &b, &s).unwrap();
    assert!(diff(&f, &without) > 1e-3, "forcing had no effect");
    for t in 0..s.n_tan() {
        assert!((f.u[0][f.index(t, 0)] - b.h[0][t]).norm() < 1e-8);
    }
}

#[test]
fn weak_neumann_pressure_matches_amplitude_pressure() {
    let p = ModelParams::default();
    let mut rng = sample::rng(21);
    for _ in 0..5 {
        let lam = sample::sector_lambda(&mut rng, &p, 2.0, 100.0);
        let xi = sample::tangential_frequency(&mut rng, 2, 0.3, 3.0);
        let d = sample::boundary_data(&mut rng, 2);
        let sol = solve_mode(&p, lam, &xi, &d).unwrap();
        let x: Vec<f64> = (0..=2000).map(|k| k as f64 * sol.mode.x_max() / 2000.0).collect();
        let err = pressure_agreement(&p, &sol, &x);
        assert!(err < 1e-4, "pressure disagreement {err:e}");
    }
}
