use halfspace::assembly::{
    assemble_amplitudes, assemble_amplitudes_degenerate, eval_e_decomposition, relation_residuals, solve_mode,
    AmplitudeSet, BoundaryModeData,
};
use halfspace::profile::{eval_profile, mode_residual, uniform_grid};
use halfspace::sample;
use halfspace::scalars::determinant_check;
use halfspace::symbols::ModeContext;
use halfspace::{ModelParams, C64};

fn worst_residual(params: &ModelParams, lam: C64, xi: &[f64], data: &BoundaryModeData) -> f64 {
    let sol = solve_mode(params, lam, xi, data).unwrap();
    let prof = eval_profile(&sol);
    let grid = uniform_grid(sol.mode.x_max(), 200);
    mode_residual(params, &sol.mode, data, &prof, &grid).max()
}

#[test]
fn random_modes_zero_the_system() {
    let mut rng = sample::rng(11);
    let mut worst: f64 = 0.0;
    for i in 0..60 {
        let dim = 2 + i % 2;
        let beta = [0.5, 1.0, 2f64.sqrt()][i % 3];
        let p = ModelParams { dim, beta, ..ModelParams::default() };
        let lam = sample::sector_lambda(&mut rng, &p, 1.0, 1e3);
        let xi = sample::tangential_frequency(&mut rng, dim, 1e-2, 10.0);
        let data = sample::boundary_data(&mut rng, dim);
        worst = worst.max(worst_residual(&p, lam, &xi, &data));
    }
    assert!(worst < 1e-9, "worst residual {worst:e}");
}

#[test]
fn zero_data_gives_zero_amplitudes() {
    let p = ModelParams::default();
    let m = ModeContext::new(&p, C64::new(0.0, 4.0), &[1.0]).unwrap();
    let r = assemble_amplitudes(&p, &m, &BoundaryModeData::zero()).unwrap();
    assert_eq!(r.c, C64::new(0.0, 0.0));
    assert!(r.a1.iter().chain(r.a2.iter()).all(|z| z.norm() == 0.0));
}

#[test]
fn relations_hold_at_headline_mode() {
    let mut rng = sample::rng(3);
    for dim in [2, 3] {
        let p = ModelParams { dim, ..ModelParams::default() };
        let xi: Vec<f64> = if dim == 2 { vec![1.0] } else { vec![1.0, 0.0] };
        let m = ModeContext::new(&p, C64::new(0.0, 4.0), &xi).unwrap();
        let data = sample::boundary_data(&mut rng, dim);
        let r = assemble_amplitudes(&p, &m, &data).unwrap();
        let rep = relation_residuals(&p, &m, &data, &r).unwrap();
        for (name, v) in &rep.relations {
            let tol = if name.starts_with('C') { 1e-8 } else { 1e-10 };
            assert!(*v < tol, "{name}: {v:e}");
        }
        let det = determinant_check(&p, &m);
        assert!((det.det_direct / det.det_formula - 1.0).norm() < 1e-8);
        assert!((det.bracket_identity - 1.0).norm() < 1e-8);
    }
}

#[test]
fn e_decomposition_matches_solve() {
    let mut rng = sample::rng(5);
    for dim in [2, 3] {
        let p = ModelParams { dim, ..ModelParams::default() };
        for _ in 0..10 {
            let lam = sample::sector_lambda(&mut rng, &p, 1.5, 100.0);
            let xi = sample::tangential_frequency(&mut rng, dim, 0.1, 5.0);
            let m = ModeContext::new(&p, lam, &xi).unwrap();
            let data = sample::boundary_data(&mut rng, dim);
            let e = assemble_amplitudes(&p, &m, &data).unwrap().e;
            let dec = eval_e_decomposition(&p, &m).unwrap();
            let ed = dec.apply(&data, &xi);
            let scale = e[..dim - 1].iter().map(|z| z.norm()).fold(0.0, f64::max);
            for k in 0..dim - 1 {
                assert!((ed[k] - e[k]).norm() < 1e-8 * scale, "k={k} {} vs {}", ed[k], e[k]);
            }
        }
    }
}

#[test]
fn degenerate_branch_zeroes_the_system() {
    let mut rng = sample::rng(9);
    for dim in [2, 3] {
        for beta in [0.5, 1.0, 2f64.sqrt()] {
            let p = ModelParams { dim, beta, ..ModelParams::default() };
            let xi = sample::tangential_frequency(&mut rng, dim, 0.1, 3.0);
            let data = sample::boundary_data(&mut rng, dim);
            let (mode, amps) = assemble_amplitudes_degenerate(&p, &xi, &data).unwrap();
            let sol = halfspace::assembly::ModeSolution { mode, amplitudes: AmplitudeSet::Degenerate(amps) };
            let prof = eval_profile(&sol);
            let grid = uniform_grid(sol.mode.x_max(), 200);
            let r = mode_residual(&p, &sol.mode, &data, &prof, &grid).max();
            assert!(r < 1e-9, "{r:e}");
        }
    }
}

#[test]
fn zero_frequency_and_decoupled_modes() {
    let mut rng = sample::rng(13);
    for dim in [2, 3] {
        for beta in [0.0, 1.0] {
            let p = ModelParams { dim, beta, ..ModelParams::default() };
            let data = sample::boundary_data(&mut rng, dim);
            let xi = vec![0.0; dim - 1];
            assert!(worst_residual(&p, C64::new(2.0, 3.0), &xi, &data) < 1e-12);
            let xi = sample::tangential_frequency(&mut rng, dim, 0.1, 3.0);
            assert!(worst_residual(&p, C64::new(-1.0, 3.0), &xi, &data) < 1e-10);
        }
    }
}
