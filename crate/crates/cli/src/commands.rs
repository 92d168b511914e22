use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use liftlab::lift::{force_scale, lift_boundary, lift_curve_on, lift_volume, LiftCurve};
use liftlab::mesh::{mesh_quality, Mesh};
use liftlab::ns_solver::{dirichlet_energy, BoundaryData, NsSolver};
use liftlab::plot;
use liftlab::stability::{
    gamma_estimate_on, mesh_for_body, optimize_body, zero_lift_search, BodyPath, GammaEstimate, HomotopyPath,
    ShapeOptResult, ZeroLiftResult,
};
use liftlab::validation::{run_criterion, Suite};
use serde_json::json;

use crate::config::Config;
use crate::store::{self, Fingerprints, RunRecord};
use crate::CliError;

pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
    pub store: PathBuf,
}

#[derive(Default)]
pub struct Outcome {
    pub fingerprints: Fingerprints,
    pub outputs: Vec<String>,
    pub stats: serde_json::Value,
    /// Failure to report after the record is written.
    pub error: Option<CliError>,
}

impl Context {
    /// Run a command and append its record to the store, failed or not.
    pub fn record(&self, command: &str, f: impl FnOnce(&Context) -> Result<Outcome, CliError>) -> Result<(), CliError> {
        let started = store::now();
        let t = Instant::now();
        let (outcome, err) = match f(self) {
            Ok(mut o) => {
                let e = o.error.take();
                (o, e)
            }
            Err(e) => (Outcome::default(), Some(e)),
        };
        let status = match &err {
            None => "ok".to_string(),
            Some(CliError::Numerical(m)) => format!("numerical failure: {m}"),
            Some(CliError::Acceptance(n)) => format!("{n} criteria failed"),
            Some(CliError::Config(e)) => format!("config error: {}", e.join("; ")),
            Some(CliError::Io(e)) => format!("i/o error: {e}"),
        };
        let rec = RunRecord {
            run_id: store::new_run_id(),
            command: command.into(),
            started,
            config: self.cfg.clone(),
            fingerprints: outcome.fingerprints,
            outputs: outcome.outputs,
            wall_seconds: t.elapsed().as_secs_f64(),
            status,
            stats: outcome.stats,
        };
        store::append(&self.store, &rec)?;
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn write(&self, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)?;
        let p = self.out.join(name);
        std::fs::write(&p, contents)?;
        println!("wrote {}", p.display());
        outputs.push(p.display().to_string());
        Ok(())
    }

    fn mesh(&self) -> Result<Mesh, CliError> {
        let body = self.cfg.body().map_err(|e| CliError::Config(vec![e]))?;
        mesh_for_body(&self.cfg.geometry.rect, &body, &self.cfg.mesh).map_err(num)
    }

    fn fingerprints(&self, mesh: Option<&Mesh>) -> Fingerprints {
        Fingerprints {
            mesh: mesh.map(|m| m.fingerprint()),
            shape: self.cfg.body().ok().map(|b| b.fingerprint()),
            flow: self.cfg.pair().ok().map(|p| p.fingerprint()),
        }
    }
}

fn num<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn mesh(ctx: &Context) -> Result<Outcome, CliError> {
    let m = ctx.mesh()?;
    let q = mesh_quality(&m);
    println!(
        "{} nodes, {} triangles, min angle {:.2} deg, h in [{:.4}, {:.4}]",
        q.nodes, q.triangles, q.min_angle_deg, q.h_min, q.h_max
    );
    let mut outputs = vec![];
    ctx.write("mesh.json", &m.to_json(), &mut outputs)?;
    ctx.write("mesh.svg", &plot::mesh_svg(&m), &mut outputs)?;
    Ok(Outcome { fingerprints: ctx.fingerprints(Some(&m)), outputs, stats: json!(q), error: None })
}

pub fn solve(ctx: &Context) -> Result<Outcome, CliError> {
    let m = ctx.mesh()?;
    let pair = ctx.cfg.pair().map_err(|e| CliError::Config(vec![e]))?;
    let lambda = ctx.cfg.flow.lambda;
    let solver = NsSolver::new(Arc::new(m.clone()), ctx.cfg.solver.clone()).map_err(num)?;
    let f = solver.solve(&BoundaryData::new(lambda, pair.clone()).map_err(num)?).map_err(num)?;
    let (lv, lb) = (lift_volume(&f).map_err(num)?, lift_boundary(&f).map_err(num)?);
    let energy = dirichlet_energy(&f);
    println!("lambda {lambda}: lift {lv:.10e} (boundary form {lb:.10e}), |grad u| {energy:.6e}");
    println!(
        "newton {} / picard {} iterations, residual {:.2e}",
        f.stats.newton_iterations, f.stats.picard_iterations, f.residual
    );
    let mut outputs = vec![];
    ctx.write("field.json", &f.to_json(), &mut outputs)?;
    ctx.write("solver_log.jsonl", &(f.log_lines().join("\n") + "\n"), &mut outputs)?;
    let stats = json!({
        "lift_volume": lv,
        "lift_boundary": lb,
        "dirichlet_energy": energy,
        "force_scale": force_scale(&m, &pair, lambda),
        "newton_iterations": f.stats.newton_iterations,
        "picard_iterations": f.stats.picard_iterations,
        "continuation_steps": f.stats.continuation_steps,
        "residual": f.residual,
        "field": f.fingerprint(),
    });
    Ok(Outcome { fingerprints: ctx.fingerprints(Some(&m)), outputs, stats, error: None })
}

pub fn lift_curve(ctx: &Context) -> Result<Outcome, CliError> {
    let m = ctx.mesh()?;
    let pair = ctx.cfg.pair().map_err(|e| CliError::Config(vec![e]))?;
    let n = ctx.cfg.curve.points;
    let lmax = ctx.cfg.flow.lambda_max;
    let grid: Vec<f64> = (0..n).map(|i| lmax * i as f64 / (n - 1) as f64).collect();
    let solver = NsSolver::new(Arc::new(m.clone()), ctx.cfg.solver.clone()).map_err(num)?;
    let c = lift_curve_on(&solver, &pair, &grid, ctx.cfg.curve.warm_start).map_err(num)?;
    println!("{} samples, sup |lift| = {:.6e} at lambda = {}", c.len(), c.sup_norm(), c.lambdas[c.argmax()]);
    if let Some(f) = &c.failure {
        eprintln!("curve truncated: {f}");
    }
    let mut outputs = vec![];
    ctx.write("lift_curve.csv", &c.to_csv(), &mut outputs)?;
    ctx.write("lift_curve.svg", &plot::lift_curve_svg(&[("lift", &c)]), &mut outputs)?;
    let stats = json!({ "samples": c.len(), "sup_norm": c.sup_norm(), "failure": c.failure });
    Ok(Outcome { fingerprints: ctx.fingerprints(Some(&m)), outputs, stats, error: None })
}

pub fn zero_lift(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let class = cfg.class().map_err(|e| CliError::Config(vec![e]))?;
    let pair = cfg.pair().map_err(|e| CliError::Config(vec![e]))?;
    let body = match &cfg.geometry.vertices {
        Some(_) => BodyPath::Fixed { body: cfg.body().map_err(|e| CliError::Config(vec![e]))? },
        None => BodyPath::Family { params: cfg.geometry.trapezium },
    };
    let path = HomotopyPath { rect: cfg.geometry.rect, body, pair, class, lambda: cfg.flow.lambda, shape: cfg.zero_lift.path };
    let z = zero_lift_search(&path, &cfg.bolzano()).map_err(num)?;
    println!(
        "zero lift at t = {:.10} (eps {:.10}, delta {:.10}): lift {:.3e}, re-solved {:.3e}, tolerance {:.3e}, {} solves",
        z.t, z.eps, z.delta, z.lift, z.verified_lift, z.lift_tol, z.solves
    );
    let mut outputs = vec![];
    ctx.write("zero_lift.json", &serde_json::to_string_pretty(&z).expect("serializes"), &mut outputs)?;
    ctx.write("zero_lift.svg", &zero_lift_svg(&z), &mut outputs)?;
    let stats = json!({ "t": z.t, "solves": z.solves, "lift": z.lift, "verified_lift": z.verified_lift });
    Ok(Outcome { fingerprints: ctx.fingerprints(None), outputs, stats, error: None })
}

fn zero_lift_svg(z: &ZeroLiftResult) -> String {
    let mut pts = vec![(0.0, z.endpoint_lifts[0]), (1.0, z.endpoint_lifts[1])];
    pts.extend(z.steps.iter().map(|s| (s.t, s.lift)));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    plot::LineChart::new("Lift along the homotopy", "t", "lift").with_series("Φ(t)", pts).to_svg()
}

pub fn gamma(ctx: &Context) -> Result<Outcome, CliError> {
    let m = ctx.mesh()?;
    let class = ctx.cfg.class().map_err(|e| CliError::Config(vec![e]))?;
    let g = gamma_estimate_on(&m, &class, ctx.cfg.flow.lambda_max, &ctx.cfg.gamma()).map_err(num)?;
    println!(
        "gamma >= {:.6e} (baseline {:.6e}) at lambda = {:.4} after {} evaluations",
        g.value, g.baseline_value, g.argmax_lambda, g.evaluations
    );
    let mut outputs = vec![];
    ctx.write("gamma.json", &serde_json::to_string_pretty(&g).expect("serializes"), &mut outputs)?;
    ctx.write("gamma_trace.jsonl", &g.trace_jsonl(), &mut outputs)?;
    ctx.write("gamma_profiles.svg", &plot::profile_svg(&g.argmax_pair), &mut outputs)?;
    let stats = json!({ "value": g.value, "baseline": g.baseline_value, "evaluations": g.evaluations });
    Ok(Outcome { fingerprints: ctx.fingerprints(Some(&m)), outputs, stats, error: None })
}

pub fn optimize(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let class = cfg.class().map_err(|e| CliError::Config(vec![e]))?;
    let bc = cfg.body_class().map_err(|e| CliError::Config(vec![e]))?;
    let space = cfg.shape_space().map_err(|e| CliError::Config(vec![e]))?;
    let r = optimize_body(&cfg.geometry.rect, &bc, &class, cfg.flow.lambda_max, &space, &cfg.shape_opt()).map_err(num)?;
    println!("best gamma {:.6e} after {} candidates; admissible {}", r.gamma, r.history.len(), r.feasibility.admissible);
    let mut outputs = vec![];
    ctx.write("optimize.json", &serde_json::to_string_pretty(&r).expect("serializes"), &mut outputs)?;
    ctx.write("optimize_shape.svg", &shape_svg(cfg, &r), &mut outputs)?;
    ctx.write("optimize_history.svg", &history_svg(&r), &mut outputs)?;
    let stats = json!({ "gamma": r.gamma, "candidates": r.history.len(), "best_shape": r.best.fingerprint() });
    Ok(Outcome { fingerprints: ctx.fingerprints(None), outputs, stats, error: None })
}

fn shape_svg(cfg: &Config, r: &ShapeOptResult) -> String {
    let start = r.history.first().and_then(|h| h.body.clone());
    let mut bodies = vec![("best", &r.best)];
    if let Some(s) = &start {
        bodies.insert(0, ("initial", s));
    }
    plot::shapes_svg(Some(&cfg.geometry.rect), Some(&cfg.geometry.confinement), &bodies)
}

fn history_svg(r: &ShapeOptResult) -> String {
    let best: Vec<(f64, f64)> = r.history.iter().map(|h| (h.index as f64, h.best_so_far)).collect();
    let each: Vec<(f64, f64)> = r.history.iter().filter_map(|h| h.gamma.map(|g| (h.index as f64, g))).collect();
    plot::LineChart::new("Shape search", "candidate", "γ estimate")
        .with_series("candidate", each)
        .with_series("best so far", best)
        .to_svg()
}

pub fn validate(ctx: &Context, suite: Suite, only: &[u8]) -> Result<Outcome, CliError> {
    let ids = if only.is_empty() { suite.criteria() } else { only.to_vec() };
    let mut results = Vec::new();
    for id in ids {
        let r = run_criterion(id);
        println!("{}", r.line());
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let mut outputs = vec![];
    ctx.write("validation.json", &serde_json::to_string_pretty(&results).expect("serializes"), &mut outputs)?;
    let error = (failed > 0).then_some(CliError::Acceptance(failed));
    Ok(Outcome { fingerprints: Fingerprints::default(), outputs, stats: json!({ "failed": failed }), error })
}

/// Render an artifact written by another subcommand.
pub fn plot(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)?;
    let bad = |what: &str| CliError::Config(vec![format!("{}: {what}", input.display())]);
    let svg = if input.extension().is_some_and(|e| e == "csv") {
        let c = LiftCurve::from_csv(&text).map_err(|e| bad(&e))?;
        plot::lift_curve_svg(&[("lift", &c)])
    } else {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
        let parse_err = |e: serde_json::Error| bad(&e.to_string());
        if v.get("triangles").is_some() {
            plot::mesh_svg(&Mesh::from_json(&text).map_err(|e| bad(&e.to_string()))?)
        } else if v.get("argmax_pair").is_some() {
            let g: GammaEstimate = serde_json::from_value(v).map_err(parse_err)?;
            plot::profile_svg(&g.argmax_pair)
        } else if v.get("feasibility").is_some() {
            let r: ShapeOptResult = serde_json::from_value(v).map_err(parse_err)?;
            let bodies: Vec<(&str, &liftlab::geometry::BodyShape)> = vec![("best", &r.best)];
            plot::shapes_svg(None, None, &bodies)
        } else if v.get("steps").is_some() {
            let z: ZeroLiftResult = serde_json::from_value(v).map_err(parse_err)?;
            zero_lift_svg(&z)
        } else if v.get("lambdas").is_some() {
            let c: LiftCurve = serde_json::from_value(v).map_err(parse_err)?;
            plot::lift_curve_svg(&[("lift", &c)])
        } else {
            return Err(bad("not a recognised artifact"));
        }
    };
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| input.with_extension("svg"));
    std::fs::write(&out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}
