use halfspace::assembly::solve_mode;
use halfspace::oracle::{oracle_mode_solve, StretchedGrid, TruncatedBvp};
use halfspace::profile::eval_profile;
use halfspace::verify::{oracle_comparison, ORACLE_STRETCH};
use halfspace::{sample, Error, ModelParams, C64};

#[test]
fn finite_differences_converge_to_closed_form_at_second_order() {
    let p = ModelParams::default();
    let rep = oracle_comparison(&p, 4, 1024, 3).unwrap();
    assert!(rep.max_error < 5e-4, "{:e}", rep.max_error);
    assert!(rep.min_order > 1.8 && rep.max_order < 2.2, "{} {}", rep.min_order, rep.max_order);
}

#[test]
fn richardson_estimate_bounds_the_true_error() {
    let p = ModelParams::default();
    let mut rng = sample::rng(17);
    let lam = C64::new(2.0, 5.0);
    let d = sample::boundary_data(&mut rng, 2);
    let sol = solve_mode(&p, lam, &[1.2], &d).unwrap();
    let prof = eval_profile(&sol);
    let grid = StretchedGrid { x_max: sol.mode.x_max(), n: 1024, stretch: ORACLE_STRETCH };
    let h = [d.h[0], d.h[1]];
    let hq = [d.hq[0][0], d.hq[0][1], d.hq[1][0], d.hq[1][1]];
    let (o, estimate) = oracle_mode_solve(&p, lam, &[1.2], &h, &hq, grid).unwrap();
    let mut err: f64 = 0.0;
    for (i, &x) in o.x.iter().enumerate() {
        let v = prof.value(x);
        err = err.max((o.u[i][0] - v.u[0]).norm()).max((o.q[i][1] - v.q[0][1]).norm());
    }
    assert!(err < 2.0 * estimate && estimate < 10.0 * err, "error {err:e} estimate {estimate:e}");
}

#[test]
fn discrete_operator_is_invertible_in_the_sector() {
    let p = ModelParams::default();
    let grid = StretchedGrid { x_max: 30.0, n: 256, stretch: ORACLE_STRETCH };
    for lam in [C64::new(2.0, 0.0), C64::new(-1.0, 3.0), C64::new(0.0, -40.0)] {
        let s = TruncatedBvp::smallest_singular_value(&p, lam, &[0.7], grid).unwrap();
        assert!(s > 1e-8, "{lam}: {s:e}");
    }
}

#[test]
fn coarse_oracle_grids_are_rejected() {
    let p = ModelParams::default();
    let grid = StretchedGrid { x_max: 30.0, n: 64, stretch: ORACLE_STRETCH };
    let z = [C64::new(0.0, 0.0); 4];
    let r = oracle_mode_solve(&p, C64::new(2.0, 0.0), &[1.0], &z[..2], &z, grid);
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}
