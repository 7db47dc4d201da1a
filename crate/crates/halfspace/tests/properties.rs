use std::f64::consts::PI;

use halfspace::assembly::{solve_mode, BoundaryModeData};
use halfspace::profile::{eval_profile, mode_residual, uniform_grid};
use halfspace::symbols::{char_poly, characteristic_roots, sector_admissibility, ModeContext};
use halfspace::{ModelParams, C64};
use proptest::prelude::*;

fn sector_point(p: &ModelParams, log_r: f64, frac: f64) -> C64 {
    let opening = PI - p.theta;
    C64::from_polar(p.r * 10f64.powf(log_r), frac * opening)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_solve_the_characteristic_polynomial(beta in 0.05f64..2.0, log_r in 0.01f64..5.0, frac in -0.99f64..0.99) {
        let p = ModelParams { beta, ..ModelParams::default() };
        let lam = sector_point(&p, log_r, frac);
        let (z1, z2) = characteristic_roots(&p, lam);
        let scale = (lam.norm() + 1.0).powi(2);
        prop_assert!(char_poly(&p, lam, z1).norm() < 1e-10 * scale);
        prop_assert!(char_poly(&p, lam, z2).norm() < 1e-10 * scale);
    }

    #[test]
    fn decay_rates_stay_in_the_right_half_plane(beta in 0.05f64..2.0, log_r in 0.01f64..5.0, frac in -0.99f64..0.99, xi in 0.0f64..100.0) {
        let p = ModelParams { beta, ..ModelParams::default() };
        let m = ModeContext::new(&p, sector_point(&p, log_r, frac), &[xi]).unwrap();
        prop_assert!(m.l1.re > 0.0 && m.l2.re > 0.0 && m.b_a.re > 0.0);
    }

    #[test]
    fn conjugate_lambda_gives_conjugate_roots(beta in 0.05f64..2.0, log_r in 0.01f64..4.0, frac in 0.01f64..0.99) {
        let p = ModelParams { beta, ..ModelParams::default() };
        let lam = sector_point(&p, log_r, frac);
        let (a1, a2) = characteristic_roots(&p, lam);
        let (b1, b2) = characteristic_roots(&p, lam.conj());
        let direct = (a1.conj() - b1).norm() + (a2.conj() - b2).norm();
        let swapped = (a1.conj() - b2).norm() + (a2.conj() - b1).norm();
        prop_assert!(direct.min(swapped) < 1e-10 * (1.0 + lam.norm()));
    }

    #[test]
    fn sector_membership_matches_its_definition(re in -50.0f64..50.0, im in -50.0f64..50.0) {
        let p = ModelParams::default();
        let lam = C64::new(re, im);
        let rep = sector_admissibility(&p, lam);
        let inside = lam.arg().abs() < PI - p.theta && lam.norm() > p.r;
        prop_assert_eq!(rep.inside, inside);
        prop_assert_eq!(rep.distance > 0.0, inside);
    }

    #[test]
    fn closed_form_modes_solve_their_system(
        beta in 0.1f64..1.5, log_r in 0.1f64..3.0, frac in -0.95f64..0.95, xi in 0.01f64..10.0,
        h in prop::array::uniform2(-1.0f64..1.0), hq in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let p = ModelParams { beta, ..ModelParams::default() };
        let lam = sector_point(&p, log_r, frac);
        let mut d = BoundaryModeData::zero();
        d.h[0] = C64::new(h[0], h[1]);
        d.hq[0][0] = C64::new(hq[0], 0.0);
        d.hq[1][1] = C64::new(-hq[0], 0.0);
        d.hq[0][1] = C64::new(hq[1], hq[2]);
        d.hq[1][0] = d.hq[0][1];
        let sol = solve_mode(&p, lam, &[xi], &d).unwrap();
        let prof = eval_profile(&sol);
        let r = mode_residual(&p, &sol.mode, &d, &prof, &uniform_grid(sol.mode.x_max(), 100)).max();
        prop_assert!(r < 1e-9, "residual {r:e}");
    }
}
