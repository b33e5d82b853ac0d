//! Command implementations.

use std::path::PathBuf;

use gdyn_core::asymptotics::{collision_profile, edge_micro_law, macro_o, macro_spiric};
use gdyn_core::exact::{
    correlator_beta_form_with, correlator_double_contour_with, density_source_with,
    ginibre_closed_sum, ginibre_density_closed, spiric_components, ExactOptions,
};
use gdyn_core::grid::{FieldGrid, FieldMeta, GridSpec};
use gdyn_core::integrators::run_trajectory_with;
use gdyn_core::{Error, Executor, SourceSpec, C64};
use serde_json::json;

use crate::cli::{
    AsymptoticArgs, Command, ExactArgs, Fig1Args, Law, Quantity, SimulateArgs, SourceArgs, Suite,
    VerifyArgs,
};
use crate::config::{
    grid_from, parse_complex, parse_source, read_source_file, source_values, SimulateSettings,
};
use crate::error::{CliError, CliResult};
use crate::exec::RayonExecutor;
use crate::fig1::{real_part_histogram, run_fig1, Fig1Setup};
use crate::io::{save_matrix, write_field, write_snapshots, write_table, Table};
use crate::manifest::RunRecorder;
use crate::plot;
use crate::verify::{self, Check, HeatSetup, Report};

/// Runs one parsed command; `argv` is echoed into the manifest.
pub fn run(command: Command, argv: Vec<String>) -> CliResult<()> {
    let exec = RayonExecutor::from_env()?;
    match command {
        Command::Simulate(a) => simulate(a, argv, &exec),
        Command::Exact(a) => exact(a, argv, &exec),
        Command::Asymptotic(a) => asymptotic(a, argv, &exec),
        Command::Verify(a) => run_verify(a, argv, &exec),
        Command::CompareFig1(a) => compare_fig1(a, argv, &exec),
    }
}

fn simulate<E: Executor>(args: SimulateArgs, argv: Vec<String>, exec: &E) -> CliResult<()> {
    let file = match &args.config {
        Some(p) => SimulateSettings::from_toml_file(p)?,
        None => SimulateSettings::default(),
    };
    let resolved = args.settings.over(&file).resolve()?;
    let cfg = &resolved.config;
    let mut rec = RunRecorder::start(&args.output.out, "simulate", argv)?;
    let dir = rec.dir().to_path_buf();
    let written = exec.map(resolved.trajectories, |k| -> CliResult<Vec<PathBuf>> {
        let mut snaps = Vec::new();
        let mut files = Vec::new();
        let mut failure = None;
        run_trajectory_with(cfg, k as u64, |mut s| {
            if let Some(m) = s.matrix.take() {
                let p = dir.join(format!("matrix_{k:04}_{:08}.gdyn", s.step));
                match save_matrix(&p, &m) {
                    Ok(()) => files.push(p),
                    Err(e) => failure = failure.take().or(Some(e)),
                }
            }
            snaps.push(s);
            Ok(())
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let csv = dir.join(format!("trajectory_{k:04}.csv"));
        write_snapshots(&csv, &snaps)?;
        files.insert(0, csv);
        Ok(files)
    });
    let mut count = 0;
    for files in written {
        let files = files?;
        count += 1;
        rec.record_all(files);
    }
    if args.output.gnuplot {
        let s = plot::snapshot_script(&rec.path("trajectory_0000.csv"), "eigenvalue snapshots")?;
        rec.record(s);
    }
    rec.finish(resolved.to_json(), Some(cfg.seed))?;
    println!(
        "simulate: {count} trajectories written to {}",
        args.output.out.display()
    );
    Ok(())
}

fn source_from(args: &SourceArgs) -> CliResult<SourceSpec> {
    match (&args.source, &args.source_file) {
        (Some(t), None) => parse_source(t, args.n),
        (None, Some(p)) => read_source_file(p, args.n),
        (None, None) => parse_source("null", args.n),
        (Some(_), Some(_)) => Err(CliError::config("give either --source or --source-file")),
    }
}

/// A single source value (any multiplicity) makes the Ginibre closed sums exact.
fn single_site(src: &SourceSpec) -> Option<C64> {
    match src.entries() {
        [(a, _)] => Some(*a),
        _ => None,
    }
}

#[derive(Default)]
struct PointResult {
    value: f64,
    outer_nodes: usize,
    contour_nodes: usize,
    pole: bool,
    cross: Option<f64>,
}

fn exact(args: ExactArgs, argv: Vec<String>, exec: &RayonExecutor) -> CliResult<()> {
    let src = source_from(&args.source)?;
    let n = src.n();
    let tau = args.tau;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(CliError::config("--tau must be positive"));
    }
    if args.cross_check && args.quantity == Quantity::Density {
        return Err(CliError::config("--cross-check applies to the correlator"));
    }
    let spec = grid_from(
        args.grid.window.as_deref(),
        args.grid.half_width,
        args.grid.nx,
        args.grid.ny,
    )?;
    let opts = ExactOptions::default();
    let site = single_site(&src);
    let results = exec.map(spec.len(), |k| -> Result<PointResult, Error> {
        let z = spec.center_of(k);
        if let Some(a) = site {
            let r2 = (z - a).norm_sqr();
            let value = match args.quantity {
                Quantity::Density => ginibre_density_closed(n, tau, r2),
                Quantity::Correlator => ginibre_closed_sum(n, tau, r2),
            };
            let cross = if args.cross_check {
                match correlator_double_contour_with(n, tau, z, &src, &opts) {
                    Ok(e) => Some((e.value - value).abs()),
                    Err(Error::PoleCollision { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            return Ok(PointResult {
                value,
                cross,
                ..Default::default()
            });
        }
        let eval = match args.quantity {
            Quantity::Density => density_source_with(n, tau, z, &src, &opts),
            Quantity::Correlator => correlator_beta_form_with(n, tau, z, &src, &opts),
        };
        let e = match eval {
            Ok(e) => e,
            Err(Error::PoleCollision { .. }) => {
                return Ok(PointResult {
                    value: f64::NAN,
                    pole: true,
                    ..Default::default()
                })
            }
            Err(e) => return Err(e),
        };
        let cross = if args.cross_check {
            Some((correlator_double_contour_with(n, tau, z, &src, &opts)?.value - e.value).abs())
        } else {
            None
        };
        Ok(PointResult {
            value: e.value,
            outer_nodes: e.outer_nodes,
            contour_nodes: e.max_contour_nodes,
            pole: false,
            cross,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let name = match args.quantity {
        Quantity::Density => "density",
        Quantity::Correlator => "correlator",
    };
    let mut meta = FieldMeta::new(&format!("exact-{name}"), n, tau);
    meta.convention = "raw-diffusion".into();
    let field = FieldGrid::new(
        spec,
        results.iter().map(|r| r.value).collect(),
        vec![0.0; spec.len()],
        meta,
    )?;
    let max_cross = results
        .iter()
        .filter_map(|r| r.cross)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let diagnostics = json!({
        "representation": if site.is_some() { "closed-sum" } else if name == "density" { "beta-contour-laplacian" } else { "beta-contour" },
        "pole_collisions": results.iter().filter(|r| r.pole).count(),
        "max_outer_nodes": results.iter().map(|r| r.outer_nodes).max().unwrap_or(0),
        "max_contour_nodes": results.iter().map(|r| r.contour_nodes).max().unwrap_or(0),
        "cross_check_max_discrepancy": max_cross,
    });
    let mut rec = RunRecorder::start(&args.output.out, "exact", argv)?;
    let csv = rec.path(&format!("{name}.csv"));
    rec.record_all(write_field(&csv, &field, diagnostics.clone())?);
    if args.output.gnuplot {
        rec.record(plot::field_script(&csv, name)?);
    }
    let config = json!({
        "quantity": name, "n": n, "tau": tau, "source": source_values(&src),
        "window": [spec.window.re_min, spec.window.re_max, spec.window.im_min, spec.window.im_max],
        "nx": spec.nx, "ny": spec.ny, "cross_check": args.cross_check,
    });
    rec.finish(config, None)?;
    println!(
        "exact {name}: {} points, {} missing",
        spec.len(),
        field.missing()
    );
    if let Some(d) = max_cross {
        println!("cross-check max discrepancy {d:.3e}");
        if !(d < 1e-6) {
            return Err(CliError::Verification(format!(
                "representations differ by {d:e}"
            )));
        }
    }
    Ok(())
}

fn linspace(from: f64, to: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..count)
            .map(|k| from + (to - from) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn asymptotic<E: Executor>(args: AsymptoticArgs, argv: Vec<String>, exec: &E) -> CliResult<()> {
    let tau = args.tau;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(CliError::config("--tau must be positive"));
    }
    let mut rec = RunRecorder::start(&args.output.out, "asymptotic", argv)?;
    let a = args.a.as_deref().map(parse_complex).transpose()?;
    let mut config = json!({ "tau": tau });
    match args.law {
        Law::Macro | Law::Spiric => {
            let spec: GridSpec = grid_from(
                args.grid.window.as_deref(),
                args.grid.half_width,
                args.grid.nx,
                args.grid.ny,
            )?;
            let (name, values, extra) = if args.law == Law::Macro {
                let src = source_from(&args.source)?;
                config["source"] = json!(source_values(&src));
                let v = exec.map(spec.len(), |k| macro_o(tau, spec.center_of(k), &src));
                ("macro", v, json!({}))
            } else {
                let a = a.ok_or_else(|| CliError::config("the spiric law needs --a re,im"))?;
                config["a"] = json!([a.re, a.im]);
                let v = exec.map(spec.len(), |k| macro_spiric(tau, a, spec.center_of(k)));
                let comps = spiric_components(tau, a, spec.window, spec.nx, spec.ny);
                ("spiric", v, json!({ "components": comps }))
            };
            let mut meta = FieldMeta::new(&format!("limit-{name}"), 0, tau);
            meta.convention = "raw-diffusion".into();
            let field = FieldGrid::new(spec, values, vec![0.0; spec.len()], meta)?;
            let csv = rec.path(&format!("{name}.csv"));
            rec.record_all(write_field(&csv, &field, extra)?);
            if args.output.gnuplot {
                rec.record(plot::field_script(&csv, name)?);
            }
            config["grid"] = json!([
                spec.window.re_min,
                spec.window.re_max,
                spec.window.im_min,
                spec.window.im_max,
                spec.nx,
                spec.ny
            ]);
        }
        Law::Edge | Law::Collision => {
            let xs = linspace(args.from, args.to, args.samples);
            let (name, header, table) = if args.law == Law::Edge {
                let mut t = Table::new(&["delta", "value"]);
                for &d in &xs {
                    t.push(vec![d, edge_micro_law(d, tau)]);
                }
                ("edge", "δ", t)
            } else {
                let a = a.ok_or_else(|| CliError::config("the collision law needs --a re,im"))?;
                let a2 = a.norm_sqr();
                config["a"] = json!([a.re, a.im]);
                let mut t = Table::new(&["t_star", "value"]);
                for &x in &xs {
                    t.push(vec![x, collision_profile(x, a2)]);
                }
                ("collision", "T", t)
            };
            config["range"] = json!([args.from, args.to, args.samples]);
            let csv = rec.path(&format!("{name}.csv"));
            write_table(&csv, &table)?;
            rec.record(csv.clone());
            if args.output.gnuplot {
                rec.record(plot::curve_script(&csv, name, header)?);
            }
        }
    }
    config["law"] = json!(format!("{:?}", args.law).to_lowercase());
    rec.finish(config, None)?;
    println!("asymptotic: written to {}", args.output.out.display());
    Ok(())
}

/// Fixed generic four-point source for hierarchy checks.
pub fn hierarchy_source(n: usize) -> CliResult<SourceSpec> {
    let base = [
        C64::new(0.5, 0.1),
        C64::new(-0.4, 0.3),
        C64::new(0.1, -0.6),
        C64::new(-0.2, -0.1),
    ];
    let vals: Vec<C64> = (0..n)
        .map(|k| base[k % 4] * (1.0 + 0.1 * (k / 4) as f64))
        .collect();
    Ok(SourceSpec::from_values(&vals)?)
}

/// Builds the report of one suite.
pub fn suite_report<E: Executor>(args: &VerifyArgs, exec: &E) -> CliResult<Report> {
    let seed = args.seed;
    let mut checks = Vec::new();
    let suite = match args.suite {
        Suite::Identities => {
            let points = args.points.unwrap_or(100);
            let s = verify::identity_sweep(points, &[2, 3, 4, 5, 6], seed, exec);
            checks.push(Check::below(
                "TQ cancellation",
                s.worst_tq,
                1e-10,
                format!("{points} points, N = 2..6"),
            ));
            checks.push(Check::below(
                "TdQ cancellation",
                s.worst_tdq,
                1e-10,
                format!("{points} points, N = 2..6"),
            ));
            let few = points.clamp(1, 10);
            let d = verify::derivative_sweep(few, seed)?;
            checks.push(Check::below(
                "Gram derivatives (extrapolated)",
                d.worst_extrapolated,
                1e-7,
                format!("{few} points"),
            ));
            checks.push(Check::at_least(
                "Gram derivatives order",
                d.min_order,
                1.9,
                "plain centred differences",
            ));
            let q = verify::q_sweep(few, seed)?;
            checks.push(Check::below(
                "Q_t residual",
                q.worst_residual,
                1e-4,
                format!("{few} points, N = 2"),
            ));
            checks.push(Check::at_least(
                "Q_t residual order",
                q.min_order,
                1.9,
                "plain centred differences",
            ));
            "identities"
        }
        Suite::Covariances => {
            let points = args.points.unwrap_or(20);
            let draws = args.draws.unwrap_or(100_000);
            let (z, comps) = verify::covariance_sweep(points, draws, &[2, 3], seed, exec);
            checks.push(Check::below(
                "one-step covariances",
                z,
                4.0,
                format!("max |z| over {comps} comparisons, {draws} draws"),
            ));
            "covariances"
        }
        Suite::Ecp => {
            let n = args.n.unwrap_or(1);
            let setup = HeatSetup::standard(n, args.trajectories.unwrap_or(10_000), seed);
            if n == 1 {
                checks.push(Check::below(
                    "scalar oracle residual",
                    setup.scalar_oracle_residual(),
                    1e-10,
                    "analytic ⟨D⟩",
                ));
            }
            let nodes = setup.monte_carlo(exec)?;
            checks.push(Check::below(
                "heat residual",
                verify::max_heat_score(&nodes),
                3.0,
                format!("max |r|/σ over {} nodes", nodes.len()),
            ));
            if n == 1 {
                let x0 = SourceSpec::null(1).values()[0];
                let worst = nodes
                    .iter()
                    .map(|r| {
                        (r.mean_d
                            - gdyn_core::observables::ecp_mean_scalar(setup.z, x0, r.w, r.t, 1.0))
                        .abs()
                            / r.mean_d_stderr
                    })
                    .fold(0.0, f64::max);
                checks.push(Check::below(
                    "mean against analytic",
                    worst,
                    3.0,
                    "max |⟨D⟩ − oracle|/σ",
                ));
            }
            let dual = verify::ecp_dual_sweep(args.points.unwrap_or(100), 8, seed)?;
            checks.push(Check::below(
                "determinant dual forms",
                dual,
                1e-8,
                "relative, N ≤ 8",
            ));
            "ecp"
        }
        Suite::Hierarchy => {
            let n = args.n.unwrap_or(4);
            let tau = 1.0;
            let src = hierarchy_source(n)?;
            let h =
                verify::hierarchy_check(n, tau, &verify::hierarchy_points(tau), 0.04, &src, exec)?;
            for k in 0..2 {
                checks.push(Check::below(
                    &format!("residual at h = {}", h.steps[k]),
                    h.residual[k],
                    h.bound[k],
                    "bound from fourth differences",
                ));
            }
            checks.push(Check::at_least(
                "observed order",
                h.order,
                2.0,
                format!("residuals {:.3e}, {:.3e}", h.residual[0], h.residual[1]),
            ));
            let (lhs, rhs) = verify::bulk_hierarchy_sides(tau, C64::new(0.2, 0.1), 0.05);
            checks.push(Check::below(
                "bulk closed forms",
                (lhs - rhs).abs(),
                1e-12,
                format!("∂τρ = {lhs:.6}"),
            ));
            "hierarchy"
        }
        Suite::Integrators => {
            let n = args.n.unwrap_or(8);
            let states = args.points.unwrap_or(100);
            let c = verify::integrator_comparison(n, states, &[1e-3, 1e-4], seed, exec)?;
            checks.push(Check::at_least(
                "Dyson versus direct order",
                c.order,
                1.0,
                format!(
                    "mismatch {:.3e} at dt = 1e-3, {:.3e} at dt = 1e-4",
                    c.mismatch[0], c.mismatch[1]
                ),
            ));
            "integrators"
        }
    };
    Ok(Report {
        suite: suite.into(),
        checks,
    })
}

fn run_verify<E: Executor>(args: VerifyArgs, argv: Vec<String>, exec: &E) -> CliResult<()> {
    let report = suite_report(&args, exec)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    let mut rec = RunRecorder::start(&args.output.out, "verify", argv)?;
    let path = rec.path(&format!("verify_{}.json", report.suite));
    crate::io::write_atomic(
        &path,
        &serde_json::to_vec_pretty(&report).expect("report serializes"),
    )?;
    rec.record(path);
    let config = json!({
        "suite": report.suite, "seed": args.seed, "points": args.points, "n": args.n,
        "draws": args.draws, "trajectories": args.trajectories,
    });
    rec.finish(config, Some(args.seed))?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(report.failures().join(", ")))
    }
}

fn compare_fig1<E: Executor>(args: Fig1Args, argv: Vec<String>, exec: &E) -> CliResult<()> {
    if args.n < 2 || !args.n.is_multiple_of(2) {
        return Err(CliError::config("--n must be even and at least 2"));
    }
    if args.bins == 0 {
        return Err(CliError::config("--bins must be positive"));
    }
    let setup = Fig1Setup::new(args.n, args.steps, args.seed);
    let result = run_fig1(&setup, exec)?;
    let mut rec = RunRecorder::start(&args.output.out, "compare-fig1", argv)?;
    let mut summary = serde_json::Map::new();
    for run in [&result.coulomb, &result.ou] {
        let traj = rec.path(&format!("{}_trajectory.csv", run.label));
        write_snapshots(&traj, &run.trajectory)?;
        rec.record(traj.clone());
        let hist = rec.path(&format!("{}_histogram.csv", run.label));
        write_table(&hist, &real_part_histogram(&run.real_parts, args.bins))?;
        rec.record(hist.clone());
        if args.output.gnuplot {
            rec.record(plot::snapshot_script(&traj, run.label)?);
            rec.record(plot::histogram_script(&hist, run.label)?);
        }
        summary.insert(format!("{}_ks", run.label), json!(run.ks));
        println!("{}: KS distance to the semicircle {:.4}", run.label, run.ks);
    }
    let path = rec.path("summary.json");
    crate::io::write_atomic(
        &path,
        &serde_json::to_vec_pretty(&summary).expect("summary serializes"),
    )?;
    rec.record(path);
    let config = json!({
        "n": args.n, "trajectory_steps": args.steps, "seed": args.seed, "bins": args.bins, "dt": setup.dt,
        "histogram_snapshots": crate::fig1::HISTOGRAM_SNAPSHOTS, "histogram_interval": crate::fig1::HISTOGRAM_INTERVAL,
    });
    rec.finish(config, Some(args.seed))?;
    Ok(())
}
