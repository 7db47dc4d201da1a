//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria that fail for a documented reason are listed in
//! `EXPECTED_FAILURES`; the test asserts that exactly those fail, so a
//! regression and an unexpected pass both show up.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use halfspace::evolution::{
    initial_data_norm, laplace_contour_solve, nonlinearity_eval, picard_iterate, smallness_threshold, time_step_solve,
    vortex_initial_data, NonlinearityParams, PulseData, ZeroBoundary,
};
use halfspace::field::{FieldGrid, GridSpec, NormalSpec};
use halfspace::verify::{
    continuity_data, eta_continuity_check, extended_xi_grid, laurent_tail_check, multiplier_class_check,
    oracle_comparison, range_growth, refinement_change, residual_suite, resolvent_ratio_check, resolvent_samples,
    scan_nonvanishing, slope, symbol_registry, ScanGrid, MAX_RANGE_GROWTH, RESIDUAL_XI_MAX,
};
use halfspace::{ModelParams, C64};

const BETAS: [f64; 3] = [0.5, 1.0, SQRT_2];

/// The claimed order-0 class of `sqrt(lambda + a) / (B - L_j)` does not
/// hold: the symbol grows linearly in `|xi'|` at fixed `lambda`.
const EXPECTED_FAILURES: [usize; 1] = [5];

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn params(beta: f64, dim: usize) -> ModelParams {
    ModelParams::new(1.0, beta, dim)
}

fn residuals() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for dim in [2, 3] {
        let r = residual_suite(&params(1.0, dim), &BETAS, 200, 64, RESIDUAL_XI_MAX, 1).unwrap();
        worst = worst.max(r.max_residual);
    }
    let secs = start.elapsed().as_secs_f64();
    // Outside the sampled range the representation loses digits; report it.
    let wide = residual_suite(&params(1.0, 2), &BETAS, 200, 64, 1e2, 1).unwrap();
    outcome(
        worst < 1e-9 && secs < 10.0,
        format!(
            "max residual {worst:.2e} over 2x600 modes, |xi'| <= {RESIDUAL_XI_MAX}, {secs:.1} s (|xi'| <= 100: {:.2e})",
            wide.max_residual
        ),
    )
}

fn oracle() -> Outcome {
    let start = Instant::now();
    let r = oracle_comparison(&params(1.0, 2), 20, 8192, 11).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = r.max_error < 1e-5 && r.min_order >= 1.8 && r.max_order <= 2.2 && secs < 60.0;
    outcome(
        pass,
        format!(
            "20 modes, n = 8192: max L2 error {:.2e}, order {:.3}..{:.3}, {secs:.1} s",
            r.max_error, r.min_order, r.max_order
        ),
    )
}

fn nonvanishing() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in BETAS {
        let p = params(beta, 2);
        let coarse = scan_nonvanishing(&p, &ScanGrid::standard(&p, 2), 1e-6).unwrap();
        let fine = scan_nonvanishing(&p, &ScanGrid::standard(&p, 3), 1e-6).unwrap();
        let change =
            ((fine.min_f - coarse.min_f).abs() / coarse.min_f).max((fine.min_g - coarse.min_g).abs() / coarse.min_g);
        pass &= coarse.min_f > 0.0 && coarse.min_g > 0.0 && change < 0.2;
        parts.push(format!(
            "beta {beta:.3}: min|F| {:.3e}, min|G|/(1+t^2) {:.3e}, {} pts, change {change:.3}",
            coarse.min_f, coarse.min_g, coarse.points
        ));
    }
    outcome(pass, parts.join("; "))
}

fn tails() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in BETAS {
        let p = params(beta, 2);
        let r = laurent_tail_check(&p, &ScanGrid::standard(&p, 2), &[10.0, 100.0, 1000.0, 10000.0]).unwrap();
        let drop = r.rows[0].f_deviation / r.rows[1].f_deviation;
        let g = r.rows[2].g_deviation;
        pass &= drop >= 5.0 && g < 0.1;
        parts.push(format!("beta {beta:.3}: F tail drop {drop:.1}x, |G/(2t^2) - 1| at 1e3 {g:.2e}"));
    }
    outcome(pass, parts.join("; "))
}

fn multipliers() -> Outcome {
    let start = Instant::now();
    let p = params(1.0, 2);
    let (coarse_grid, fine_grid) = (ScanGrid::standard(&p, 2), ScanGrid::standard(&p, 3));
    let mut unstable = Vec::new();
    let mut worst_change: f64 = 0.0;
    let registry = symbol_registry();
    for s in &registry {
        let coarse = multiplier_class_check(&p, s, &coarse_grid).unwrap();
        let fine = multiplier_class_check(&p, s, &fine_grid).unwrap();
        match refinement_change(&coarse, &fine) {
            Ok(c) if c <= 0.5 => worst_change = worst_change.max(c),
            _ => unstable.push(s.spec.symbol_id.clone()),
        }
    }
    let mut unbounded = Vec::new();
    for beta in BETAS {
        let p = params(beta, 2);
        let base_grid = ScanGrid::standard(&p, 1);
        let extended = extended_xi_grid(&p, 1, 1e6, 1e3);
        for s in &registry {
            let base = multiplier_class_check(&p, s, &base_grid).unwrap();
            let growth = range_growth(&p, s, &extended, &base).unwrap();
            if growth > MAX_RANGE_GROWTH && !unbounded.contains(&s.spec.symbol_id) {
                unbounded.push(s.spec.symbol_id.clone());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        unstable.is_empty() && unbounded.is_empty(),
        format!(
            "{} symbols, |alpha| <= 2, ell in {{0,1}}; worst refinement change {worst_change:.3}; unstable {:?}; \
             grow past |xi'| = 1e3 {:?}; {secs:.0} s",
            registry.len(),
            unstable,
            unbounded
        ),
    )
}

fn eta_continuity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in BETAS {
        let p = params(beta, 2);
        let r =
            eta_continuity_check(&p, &[0.25, 0.5, 1.0, 2.0, 4.0], &continuity_data(2, 1), &[1e-2, 1e-3, 1e-4]).unwrap();
        pass &= r.coefficient_order >= 1.0 - 1e-3 && r.profile_order >= 1.0 - 1e-3;
        parts.push(format!("beta {beta:.3}: orders {:.4} / {:.4}", r.coefficient_order, r.profile_order));
    }
    outcome(pass, parts.join("; "))
}

fn resolvent_ratio() -> Outcome {
    let p = params(1.0, 2);
    let samples = resolvent_samples(&p, 20, 2.0, 2000.0, 5);
    let r = resolvent_ratio_check(&p, &samples, 4096).unwrap();
    outcome(
        r.growth < 2.0,
        format!("20 samples, |lambda| in [2, 2000]: max ratio {:.3}, growth {:.3}", r.max_ratio, r.growth),
    )
}

fn evolution() -> Outcome {
    let start = Instant::now();
    let p = params(1.0, 2);
    let spec = GridSpec::new(2, 64, 2.0 * PI, NormalSpec::Stretched { n: 1024, x_max: 20.0, stretch: 4.0 });
    let data = PulseData::centered(&spec, 1.0);
    let (reference, _) = laplace_contour_solve(&p, &spec, &data, 1.0, 256, 10.0).unwrap();
    let mut pts = Vec::new();
    let mut errors = Vec::new();
    for steps in [16usize, 32, 64, 128] {
        let cn = time_step_solve(&p, &spec, &data, None, 1.0, steps, steps / 16).unwrap();
        let e = reference.relative_difference(&cn);
        pts.push(((1.0 / steps as f64).ln(), e.ln()));
        errors.push(format!("{e:.2e}"));
    }
    let order = slope(&pts);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (order - 2.0).abs() <= 0.3 && secs < 300.0,
        format!("errors at dt = 1/16..1/128: [{}], slope {order:.3}, {secs:.0} s", errors.join(", ")),
    )
}

#[allow(clippy::needless_range_loop)]
fn nonlinearity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut zero_ok = true;
    for dim in [2, 3] {
        let spec =
            GridSpec::new(dim, if dim == 2 { 16 } else { 8 }, 2.0 * PI, NormalSpec::Uniform { n: 24, x_max: 8.0 });
        let mut rng = halfspace::sample::rng(17);
        for beta in BETAS {
            let p = params(beta, dim);
            let nl = NonlinearityParams::from_model(&p);
            let zero = nonlinearity_eval(&FieldGrid::zeros(&spec), &nl);
            zero_ok &= zero.f.iter().chain(&zero.g).flatten().all(|z| z.norm() == 0.0);
            let field = halfspace::sample::random_field(&mut rng, &spec);
            let g = nonlinearity_eval(&field, &nl).g;
            let scale = g.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
            for i in 0..g[0].len() {
                let mut trace = C64::new(0.0, 0.0);
                for j in 0..dim {
                    trace += g[j * dim + j][i];
                    for k in 0..dim {
                        worst = worst.max((g[j * dim + k][i] - g[k * dim + j][i]).norm() / scale);
                    }
                }
                worst = worst.max(trace.norm() / scale);
            }
        }
    }
    outcome(
        worst <= 1e-12 && zero_ok,
        format!("worst asymmetry or trace {worst:.2e}; zero fields give zero forcing: {zero_ok}"),
    )
}

fn picard() -> Outcome {
    let start = Instant::now();
    let p = params(1.0, 2);
    let nl = NonlinearityParams::from_model(&p);
    let fine = GridSpec::new(2, 64, 2.0 * PI, NormalSpec::Stretched { n: 256, x_max: 10.0, stretch: 3.0 });
    let shape = |spec: &GridSpec| vortex_initial_data(spec, &[PI, 3.0], 0.6, 1.0);
    let unit = initial_data_norm(&shape(&fine), p.q);
    let mut init = shape(&fine);
    init.scale(C64::new(1e-3 / unit, 0.0));
    let boundary = ZeroBoundary { spec: fine.clone() };
    let run = picard_iterate(&p, &nl, &fine, &init, &boundary, 0.1, 32, 1e6, 30);
    let (contracted, ratios) = match &run {
        Ok((_, rep)) => (rep.contracted, rep.ratios.clone()),
        Err(_) => (false, Vec::new()),
    };
    let coarse = GridSpec::new(2, 32, 2.0 * PI, NormalSpec::Stretched { n: 128, x_max: 10.0, stretch: 3.0 });
    let t = smallness_threshold(&p, &nl, &coarse, &shape(&coarse), 0.1, 16, 1e-3, 1e4, 30).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2e}")).collect();
    outcome(
        contracted && ratios.len() >= 4 && t.threshold.is_some(),
        format!(
            "epsilon 1e-3: ratios [{}]; threshold search: largest contracting {:?}, first failure {:?}; {secs:.0} s",
            shown.join(", "),
            t.threshold,
            t.first_failure
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "mode residuals", residuals),
        (2, "finite-difference oracle", oracle),
        (3, "non-vanishing", nonvanishing),
        (4, "Laurent tails", tails),
        (5, "multiplier constants", multipliers),
        (6, "double-root continuity", eta_continuity),
        (7, "resolvent ratio", resolvent_ratio),
        (8, "evolution cross-check", evolution),
        (9, "nonlinearity algebra", nonlinearity),
        (10, "Picard contraction", picard),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        let o = f();
        println!("criterion {id} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    assert_eq!(failed, EXPECTED_FAILURES, "failing criteria differ from the documented set");
}
