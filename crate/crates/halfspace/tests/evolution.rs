use std::f64::consts::PI;

use halfspace::evolution::{
    initial_data_norm, laplace_contour_solve, maxreg_norms, picard_iterate, time_step_solve, vortex_initial_data,
    NonlinearityParams, PulseData, Trajectory, ZeroBoundary,
};
use halfspace::field::{GridSpec, NormalSpec};
use halfspace::{Error, ModelParams, C64};

fn spec(count: usize, n: usize) -> GridSpec {
    GridSpec::new(2, count, 2.0 * PI, NormalSpec::Stretched { n, x_max: 20.0, stretch: 4.0 })
}

#[test]
fn zero_data_stays_zero() {
    let p = ModelParams::default();
    let s = spec(8, 64);
    let t = time_step_solve(&p, &s, &ZeroBoundary { spec: s.clone() }, None, 0.5, 8, 2).unwrap();
    assert_eq!(t.times.len(), 5);
    assert!(t.fields.iter().all(|f| f.max_abs() == 0.0));
}

#[test]
fn contour_must_lie_right_of_the_sector_vertex() {
    let p = ModelParams::default();
    let s = spec(8, 64);
    let r = laplace_contour_solve(&p, &s, &PulseData::centered(&s, 1.0), 1.0, 16, 0.5);
    assert!(matches!(r, Err(Error::ContourTooLow { .. })));
}

#[test]
fn stepping_converges_to_the_contour_solution() {
    let p = ModelParams::default();
    let s = spec(16, 256);
    let data = PulseData::centered(&s, 1.0);
    let (reference, rep) = laplace_contour_solve(&p, &s, &data, 1.0, 128, 10.0).unwrap();
    assert!(rep.max_residual < 1e-8, "{:e}", rep.max_residual);
    let e1 = reference.relative_difference(&time_step_solve(&p, &s, &data, None, 1.0, 16, 1).unwrap());
    let e2 = reference.relative_difference(&time_step_solve(&p, &s, &data, None, 1.0, 32, 2).unwrap());
    let order = (e1 / e2).log2();
    assert!(e2 < 1e-2 && order > 1.7, "errors {e1:e} {e2:e}");
}

#[test]
fn trajectories_round_trip_through_disk() {
    let p = ModelParams::default();
    let s = spec(8, 64);
    let t = time_step_solve(&p, &s, &PulseData::centered(&s, 1.0), None, 1.0, 8, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    t.write_dir(dir.path()).unwrap();
    let back = Trajectory::read_dir(dir.path()).unwrap();
    assert_eq!(back.times, t.times);
    // only real parts are stored; the solver leaves round-off imaginary parts
    assert!(t.relative_difference(&back) < 1e-12);
}

#[test]
fn maximal_regularity_ratio_is_finite() {
    let p = ModelParams::default();
    let s = spec(16, 128);
    let data = PulseData::centered(&s, 1.0);
    let (traj, _) = laplace_contour_solve(&p, &s, &data, 1.0, 64, 4.0).unwrap();
    let rep = maxreg_norms(&traj, &p, &data, 4.0);
    assert!(rep.lhs > 0.0 && rep.rhs > 0.0 && rep.ratio.is_finite(), "{rep:?}");
}

#[test]
fn picard_contracts_for_small_data() {
    let p = ModelParams::default();
    let s = GridSpec::new(2, 16, 2.0 * PI, NormalSpec::Stretched { n: 64, x_max: 10.0, stretch: 3.0 });
    let shape = vortex_initial_data(&s, &[PI, 3.0], 0.6, 1.0);
    let mut init = shape.clone();
    init.scale(C64::new(1e-2 / initial_data_norm(&shape, p.q), 0.0));
    let nl = NonlinearityParams::from_model(&p);
    let (_, rep) = picard_iterate(&p, &nl, &s, &init, &ZeroBoundary { spec: s.clone() }, 0.1, 8, 1e6, 20).unwrap();
    assert!(rep.contracted && rep.kappa < 1.0);
    assert!(rep.differences.last().unwrap() < &(1e-8 * rep.norms.last().unwrap()));
}
