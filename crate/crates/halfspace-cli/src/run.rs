//! Subcommand execution and report writing.

use std::fs;
use std::path::Path;

use halfspace::evolution::{
    initial_data_norm, laplace_contour_solve, maxreg_norms, picard_iterate, smallness_threshold, time_step_solve,
    vortex_initial_data, NonlinearityParams, PulseData, ZeroBoundary,
};
use halfspace::symbols::{characteristic_roots, eta_point, normalized_roots, sector_admissibility, ModeContext};
use halfspace::verify::{
    continuity_data, eta_continuity_check, extended_xi_grid, laurent_tail_check, multiplier_class_check,
    multiplier_csv, oracle_comparison, range_growth, refinement_change, residual_suite, root_bound_check,
    scan_nonvanishing, symbol_registry, ScanGrid, MAX_RANGE_GROWTH,
};
use halfspace::{resolvent, sample, Error, C64, SCHEMA_VERSION};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    Cli, Command, EvolveMethod, OracleCommand, RunConfig, ScanCommand, SolveCommand, VerifyCommand, THREADS_ENV,
};

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// A check or solver failed on valid input.
    Assertion(String),
    /// The configuration could not be read or is invalid.
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam { .. } | Error::InvalidInput(_) | Error::ContourTooLow { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Assertion(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    let cfg = load_config(&cli)?;
    cfg.params.validate().map_err(|e| Failure::Config(e.to_string()))?;
    configure_threads(cfg.threads)?;
    fs::create_dir_all(&cfg.output)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", cfg.output.display())))?;
    match &cli.command {
        Command::Roots => roots(&cfg),
        Command::Scan(ScanCommand::Nonvanishing) => scan_nonvanishing_cmd(&cfg),
        Command::Scan(ScanCommand::Multipliers { symbol }) => scan_multipliers(&cfg, symbol.as_deref()),
        Command::Verify(VerifyCommand::Residual) => verify_residual(&cfg),
        Command::Verify(VerifyCommand::EtaLimit) => verify_eta_limit(&cfg),
        Command::Solve(SolveCommand::Resolvent) => solve_resolvent(&cfg),
        Command::Solve(SolveCommand::Evolve { method }) => solve_evolve(&cfg, *method),
        Command::Picard { threshold } => picard(&cfg, *threshold),
        Command::Oracle(OracleCommand::Compare) => oracle_compare(&cfg),
    }
}

fn load_config(cli: &Cli) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(Failure::Config)?
        }
        None => RunConfig::default(),
    };
    cfg.apply(&cli.overrides).map_err(Failure::Config)?;
    if cfg.threads.is_none() {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            let n = v.parse().map_err(|_| Failure::Config(format!("{THREADS_ENV}={v} is not a thread count")))?;
            cfg.threads = Some(n);
        }
    }
    Ok(cfg)
}

fn configure_threads(threads: Option<usize>) -> Outcome {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Config("threads must be positive".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Writes `{schema_version, command, config, report}` to `<output>/<name>.json`.
fn write_report<T: Serialize>(cfg: &RunConfig, name: &str, report: &T) -> Outcome {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": name,
        "config": cfg,
        "report": report,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Assertion(e.to_string()))?;
    write_file(&cfg.output.join(format!("{name}.json")), &text)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Assertion(format!("cannot write {}: {e}", path.display())))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Assertion(msg()))
    }
}

fn lambda_of(cfg: &RunConfig) -> C64 {
    C64::new(cfg.lambda[0], cfg.lambda[1])
}

fn roots(cfg: &RunConfig) -> Outcome {
    let p = &cfg.params;
    let lambda = lambda_of(cfg);
    if cfg.xi.len() != p.dim - 1 {
        return Err(Failure::Config(format!("xi needs {} components", p.dim - 1)));
    }
    let (z1, z2) = characteristic_roots(p, lambda);
    let sector = sector_admissibility(p, lambda);
    let mode = ModeContext::new(p, lambda, &cfg.xi)?;
    let report = json!({
        "lambda": lambda,
        "xi": cfg.xi,
        "z": [z1, z2],
        "normalized": normalized_roots(p, lambda),
        "b": mode.b_a,
        "l": [mode.l1, mode.l2],
        "min_decay": mode.min_decay(),
        "double_root": eta_point(p).ok(),
        "degenerate": mode.degenerate,
        "sector": sector,
    });
    println!("z1 = {z1:.12e}\nz2 = {z2:.12e}\nB = {:.12e}\nL1 = {:.12e}\nL2 = {:.12e}", mode.b_a, mode.l1, mode.l2);
    println!("inside sector: {} (distance {:.3e})", sector.inside, sector.distance);
    write_report(cfg, "roots", &report)
}

fn scan_grid(cfg: &RunConfig, level: u32) -> ScanGrid {
    let s = &cfg.scan;
    ScanGrid::new(&cfg.params, level, s.lambda_max, s.xi_min, s.xi_max)
}

fn scan_nonvanishing_cmd(cfg: &RunConfig) -> Outcome {
    let p = &cfg.params;
    let level = cfg.scan.level;
    let coarse = scan_nonvanishing(p, &scan_grid(cfg, level), cfg.scan.floor)?;
    let fine = scan_nonvanishing(p, &scan_grid(cfg, level + 1), cfg.scan.floor)?;
    let change =
        ((fine.min_f - coarse.min_f).abs() / coarse.min_f).max((fine.min_g - coarse.min_g).abs() / coarse.min_g);
    let tails = laurent_tail_check(p, &scan_grid(cfg, level), &[10.0, 100.0, 1000.0, 10000.0])?;
    let roots = root_bound_check(p, &scan_grid(cfg, level))?;
    println!(
        "min |F| = {:.6e}, min |G|/(1+t^2) = {:.6e} at level {}; refinement change {:.3}",
        fine.min_f,
        fine.min_g,
        level + 1,
        change
    );
    println!("tail decay exponent {:.4}", tails.decay_exponent);
    write_report(
        cfg,
        "scan_nonvanishing",
        &json!({ "coarse": coarse, "fine": fine, "change": change, "tails": tails, "roots": roots }),
    )?;
    check(change <= cfg.scan.max_change, || format!("lower bounds changed by {change:.3} under refinement"))?;
    check(tails.decay_exponent <= -1.9, || format!("tail decays like t^{:.3}", tails.decay_exponent))
}

fn scan_multipliers(cfg: &RunConfig, only: Option<&str>) -> Outcome {
    let p = &cfg.params;
    let level = cfg.scan.level;
    let (coarse_grid, fine_grid) = (scan_grid(cfg, level), scan_grid(cfg, level + 1));
    let registry: Vec<_> =
        symbol_registry().into_iter().filter(|s| only.is_none_or(|id| s.spec.symbol_id == id)).collect();
    if registry.is_empty() {
        return Err(Failure::Config(format!("no registered symbol named {:?}", only.unwrap_or_default())));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    let sc = &cfg.scan;
    let extended = extended_xi_grid(p, sc.extension_level, sc.lambda_max, sc.xi_max);
    for s in &registry {
        let coarse = multiplier_class_check(p, s, &coarse_grid)?;
        let fine = multiplier_class_check(p, s, &fine_grid)?;
        let max = fine.iter().map(|r| r.constant).fold(0.0, f64::max);
        let change = refinement_change(&coarse, &fine);
        let growth = range_growth(p, s, &extended, &coarse)?;
        let (change_value, stable) = match &change {
            Ok(c) => (Some(*c), *c <= sc.multiplier_max_change),
            Err(_) => (None, false),
        };
        let bounded = growth <= MAX_RANGE_GROWTH;
        println!(
            "{:28} constant {:.4e}  change {}  range growth {:.3}",
            s.spec.symbol_id,
            max,
            change_value.map_or("unstable".into(), |c| format!("{c:.3}")),
            growth
        );
        if !stable || !bounded {
            failures.push(s.spec.symbol_id.clone());
        }
        summary.push(json!({
            "symbol_id": s.spec.symbol_id,
            "order": s.spec.order,
            "kind": s.spec.kind,
            "constant": max,
            "change": change_value,
            "range_growth": growth,
            "stable": stable,
            "bounded": bounded,
        }));
        rows.extend(coarse);
        rows.extend(fine);
    }
    write_file(&cfg.output.join("multipliers.csv"), &multiplier_csv(&rows)?)?;
    write_report(cfg, "scan_multipliers", &summary)?;
    check(failures.is_empty(), || format!("unstable or unbounded constants: {}", failures.join(", ")))
}

fn verify_residual(cfg: &RunConfig) -> Outcome {
    let r = &cfg.residual;
    let report = residual_suite(&cfg.params, &r.betas, r.samples, r.points, r.xi_max, cfg.seed)?;
    println!("{} samples, max normalised residual {:.3e}", report.samples, report.max_residual);
    write_report(cfg, "verify_residual", &report)?;
    check(report.max_residual <= r.tolerance, || {
        format!("residual {:.3e} above {:.1e}", report.max_residual, r.tolerance)
    })
}

fn verify_eta_limit(cfg: &RunConfig) -> Outcome {
    let e = &cfg.eta_limit;
    let data = continuity_data(cfg.params.dim, cfg.seed);
    let report = eta_continuity_check(&cfg.params, &e.xi, &data, &e.eps)?;
    println!("coefficient order {:.3}, profile order {:.3}", report.coefficient_order, report.profile_order);
    write_report(cfg, "verify_eta_limit", &report)?;
    check(report.coefficient_order >= e.min_order && report.profile_order >= e.min_order, || {
        format!("orders {:.3}/{:.3} below {}", report.coefficient_order, report.profile_order, e.min_order)
    })
}

fn solve_resolvent(cfg: &RunConfig) -> Outcome {
    let rc = &cfg.resolvent;
    let mut rng = sample::rng(cfg.seed);
    let bdry = sample::smooth_boundary_fields(&mut rng, &rc.grid, rc.max_wave);
    let modes = resolvent::solve_boundary_modes(&cfg.params, lambda_of(cfg), &bdry, &rc.grid)?;
    let report = modes.report(&cfg.params);
    let field = modes.to_field();
    field.write(&cfg.output.join("resolvent"))?;
    println!("{} modes solved, max mode residual {:.3e}", report.modes_solved, report.max_mode_residual);
    write_report(cfg, "solve_resolvent", &report)?;
    check(report.max_mode_residual <= rc.tolerance, || {
        format!("mode residual {:.3e} above {:.1e}", report.max_mode_residual, rc.tolerance)
    })
}

fn solve_evolve(cfg: &RunConfig, method: EvolveMethod) -> Outcome {
    let e = &cfg.evolve;
    let p = &cfg.params;
    let data = PulseData::centered(&e.grid, e.t_end);
    let (traj, extra) = match method {
        EvolveMethod::Laplace => {
            let (traj, rep) = laplace_contour_solve(p, &e.grid, &data, e.t_end, e.steps, e.gamma)?;
            (traj, json!(rep))
        }
        EvolveMethod::CrankNicolson => {
            (time_step_solve(p, &e.grid, &data, None, e.t_end, e.steps, e.output_every)?, json!(null))
        }
    };
    let maxreg = maxreg_norms(&traj, p, &data, e.gamma);
    traj.write_dir(&cfg.output.join("trajectory"))?;
    println!("{} snapshots; maximal-regularity ratio {:.4}", traj.times.len(), maxreg.ratio);
    write_report(cfg, "solve_evolve", &json!({ "method": format!("{method:?}"), "solver": extra, "maxreg": maxreg }))
}

fn picard(cfg: &RunConfig, threshold: bool) -> Outcome {
    let pc = &cfg.picard;
    let p = &cfg.params;
    let nl = NonlinearityParams::from_model(p);
    let shape = picard_shape(&pc.grid);
    let unit = initial_data_norm(&shape, p.q);
    let mut init = shape.clone();
    init.scale(C64::new(pc.epsilon / unit, 0.0));
    let boundary = ZeroBoundary { spec: pc.grid.clone() };
    let outcome = picard_iterate(p, &nl, &pc.grid, &init, &boundary, pc.t_end, pc.steps, pc.omega, pc.max_iter);
    let contraction = match outcome {
        Ok((_, rep)) => {
            println!("contracted after {} iterations, kappa {:.4e}", rep.differences.len(), rep.kappa);
            json!(rep)
        }
        Err(Error::NoContraction { ratios }) => {
            write_report(cfg, "picard", &json!({ "contracted": false, "ratios": ratios }))?;
            return Err(Failure::Assertion(format!("no contraction at epsilon {:.3e}", pc.epsilon)));
        }
        Err(e) => return Err(e.into()),
    };
    let search = if threshold {
        let t =
            smallness_threshold(p, &nl, &pc.grid, &shape, pc.t_end, pc.steps, pc.epsilon, pc.epsilon_max, pc.max_iter)?;
        println!("largest contracting epsilon {:?}, first failure {:?}", t.threshold, t.first_failure);
        Some(t)
    } else {
        None
    };
    write_report(cfg, "picard", &json!({ "contraction": contraction, "threshold": search }))
}

/// Vortex centred in the box, three units from the wall.
fn picard_shape(spec: &halfspace::field::GridSpec) -> halfspace::field::FieldGrid {
    let center: Vec<f64> = spec.lengths.iter().map(|l| 0.5 * l).chain(std::iter::once(3.0)).collect();
    vortex_initial_data(spec, &center, 0.6, 1.0)
}

fn oracle_compare(cfg: &RunConfig) -> Outcome {
    let o = &cfg.oracle;
    let report = oracle_comparison(&cfg.params, o.modes, o.n, cfg.seed)?;
    println!("max error {:.3e}, observed order {:.3}..{:.3}", report.max_error, report.min_order, report.max_order);
    write_report(cfg, "oracle_compare", &report)?;
    check(report.max_error <= o.tolerance, || format!("error {:.3e} above {:.1e}", report.max_error, o.tolerance))?;
    check(report.min_order >= o.order_min && report.max_order <= o.order_max, || {
        format!("order range {:.3}..{:.3} outside {}..{}", report.min_order, report.max_order, o.order_min, o.order_max)
    })
}
