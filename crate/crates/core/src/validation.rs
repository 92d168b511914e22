//! Acceptance criteria, runnable one by one or as suites.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::flowshape::{
    flow_homotopy, flux, is_admissible_flow, reflect_flow, renormalize_flux, FlowClassParams, FlowProfile,
    FlowShapePair, DEFAULT_NODES,
};
use crate::geometry::{body_family, reflect_body, BodyClass, BodyShape, ConfinementBox, Rect, TrapeziumParams};
use crate::lift::{force_scale, lift_boundary, lift_volume};
use crate::mesh::{generate_mesh, reflect_mesh, MeshOptions};
use crate::ns_solver::{dirichlet_energy, solve_steady_ns, BoundaryData, NsSolver, SolverConfig};
use crate::optim::NelderMead;
use crate::stability::{
    continuity_probe, gamma_estimate, mesh_for_body, optimize_body, zero_lift_search, BolzanoConfig,
    ContinuityConfig, GammaConfig, HomotopyPath, ProbeBase, ProbeKind, ShapeOptConfig, ShapeSpace,
};

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "exact Poiseuille reproduction"),
    (2, "zero-lift baseline"),
    (3, "reflection antisymmetry"),
    (4, "body homotopy exactness"),
    (5, "flow homotopy contract"),
    (6, "Bolzano zero-lift search"),
    (7, "lift evaluator consistency"),
    (8, "continuity probes"),
    (9, "gamma monotone in r"),
    (10, "energy bound shape"),
    (11, "brute-force optimizer oracle"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Closed-form and geometric checks; a few seconds.
    Trivial,
    /// Every criterion.
    Acceptance,
}

impl Suite {
    pub fn criteria(self) -> Vec<u8> {
        match self {
            Suite::Trivial => vec![1, 4, 5],
            Suite::Acceptance => CRITERIA.iter().map(|c| c.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Headline measured value.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: measured {:.3e}, threshold {:.3e} ({:.1} s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.seconds,
            self.detail
        )
    }
}

pub fn run_suite(suite: Suite) -> Vec<CriterionResult> {
    suite.criteria().into_iter().map(run_criterion).collect()
}

/// Run one criterion; errors become failures with the message as detail.
pub fn run_criterion(id: u8) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1).to_string();
    let elapsed = crate::stopwatch();
    let out = match id {
        1 => c1_poiseuille(),
        2 => c2_zero_lift(),
        3 => c3_reflection(),
        4 => c4_body_family(),
        5 => c5_flow_homotopy(),
        6 => c6_bolzano(),
        7 => c7_evaluators(),
        8 => c8_continuity(),
        9 => c9_gamma_monotone(),
        10 => c10_energy(),
        11 => c11_oracle(),
        _ => Err(format!("no criterion {id}")),
    };
    let seconds = elapsed();
    match out {
        Ok(o) => {
            let in_time = o.max_seconds.map_or(true, |m| seconds <= m);
            let mut detail = o.detail;
            if !in_time {
                detail.push_str(&format!("; runtime over {} s", o.max_seconds.unwrap_or_default()));
            }
            CriterionResult { id, name, passed: o.passed && in_time, measured: o.measured, threshold: o.threshold, detail, seconds }
        }
        Err(e) => CriterionResult {
            id,
            name,
            passed: false,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {e}"),
            seconds,
        },
    }
}

struct Outcome {
    passed: bool,
    measured: f64,
    threshold: f64,
    detail: String,
    max_seconds: Option<f64>,
}

impl Outcome {
    fn below(measured: f64, threshold: f64, detail: String) -> Self {
        Outcome { passed: measured <= threshold, measured, threshold, detail, max_seconds: None }
    }

    fn within(mut self, seconds: f64) -> Self {
        self.max_seconds = Some(seconds);
        self
    }
}

type Res = Result<Outcome, String>;

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

/// Default channel `[-5, 5] x [-1, 1]`.
pub fn default_rect() -> Rect {
    Rect { half_width: 5.0, half_height: 1.0 }
}

/// Default trapezium `l = 0.6, h = 0.15, γ = 0.3`.
pub fn default_trapezium() -> TrapeziumParams {
    TrapeziumParams { l: 0.6, h: 0.15, gamma: 0.3 }
}

fn poiseuille_pair() -> Result<FlowShapePair, String> {
    let p = FlowProfile::poiseuille(1.0, DEFAULT_NODES).map_err(e)?;
    FlowShapePair::new(p.clone(), p, 0).map_err(e)
}

/// Poiseuille inflow and an outflow with an odd `sin(πx)` component.
pub fn skewed_pair() -> Result<FlowShapePair, String> {
    let vin = FlowProfile::poiseuille(1.0, DEFAULT_NODES).map_err(e)?;
    let vout = FlowProfile::sample(1.0, DEFAULT_NODES, |x| 0.75 * (1.0 - x * x) + 0.3 * (PI * x).sin()).map_err(e)?;
    FlowShapePair::new(vin, renormalize_flux(&vout, 1.0), 0).map_err(e)
}

fn c1_poiseuille() -> Res {
    let m = generate_mesh(&default_rect(), None, &MeshOptions::uniform(1.0 / 8.0)).map_err(e)?;
    let lambda = 1.0;
    let f = solve_steady_ns(&m, &BoundaryData::new(lambda, poiseuille_pair()?).map_err(e)?, &SolverConfig::default())
        .map_err(e)?;
    let umax = 0.75 * lambda;
    let mut err_u = 0.0f64;
    for (p, u) in f.space().nodes().iter().zip(&f.velocity) {
        err_u = err_u.max((u[0] - umax * (1.0 - p[1] * p[1])).abs()).max(u[1].abs());
    }
    let pmax = 1.5 * lambda * 5.0;
    let err_p = m.nodes().iter().zip(&f.pressure).map(|(p, q)| (q + 1.5 * lambda * p[0]).abs()).fold(0.0, f64::max);
    let rel = (err_u / umax).max(err_p / pmax);
    Ok(Outcome::below(rel, 1e-9, format!("velocity {:.2e}, pressure {:.2e}", err_u / umax, err_p / pmax)).within(30.0))
}

fn c2_zero_lift() -> Res {
    let body = BodyShape::rectangle(-0.6, 0.6, -0.15, 0.15).map_err(e)?;
    let m = generate_mesh(&default_rect(), Some(&body), &MeshOptions::uniform(1.0 / 6.0).mirrored()).map_err(e)?;
    let pair = poiseuille_pair()?;
    let f = solve_steady_ns(&m, &BoundaryData::new(0.5, pair.clone()).map_err(e)?, &SolverConfig::default()).map_err(e)?;
    let scale = force_scale(&m, &pair, 0.5);
    let l = lift_volume(&f).map_err(e)?;
    Ok(Outcome::below(l.abs() / scale, 1e-8, format!("lift {l:.3e}, scale {scale:.3e}")).within(120.0))
}

fn c3_reflection() -> Res {
    let m = generate_mesh(&default_rect(), Some(&default_trapezium().body()), &MeshOptions::uniform(1.0 / 6.0))
        .map_err(e)?;
    let pair = skewed_pair()?;
    let cfg = SolverConfig::default();
    let f = solve_steady_ns(&m, &BoundaryData::new(0.5, pair.clone()).map_err(e)?, &cfg).map_err(e)?;
    let rp = reflect_flow(&pair).map_err(e)?;
    let g = solve_steady_ns(&reflect_mesh(&m), &BoundaryData::new(0.5, rp).map_err(e)?, &cfg).map_err(e)?;
    let (a, b) = (lift_volume(&f).map_err(e)?, lift_volume(&g).map_err(e)?);
    let rel = (a + b).abs() / a.abs().max(b.abs());
    Ok(Outcome::below(rel, 1e-10, format!("lifts {a:.6e} and {b:.6e}")))
}

fn c4_body_family() -> Res {
    let p = default_trapezium();
    let (l, h, g) = (p.l, p.h, p.gamma);
    let target = 4.0 * l * h + h * g;
    let mut worst = 0.0f64;
    for k in 0..=100 {
        let b = body_family(k as f64 / 100.0, &p).map_err(e)?;
        worst = worst.max((b.area() - target).abs() / target);
    }
    let b23 = body_family(2.0 / 3.0, &p).map_err(e)?;
    let expect = [[-l, -h], [-l, h], [l + 3.0 * g / 5.0, h], [l + 3.0 * g / 5.0, -h / 3.0], [l, -h]];
    let vert_err = expect
        .iter()
        .map(|v| {
            b23.vertices().iter().map(|w| (w[0] - v[0]).abs().max((w[1] - v[1]).abs())).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let b0 = body_family(0.0, &p).map_err(e)?;
    let b1 = body_family(1.0, &p).map_err(e)?;
    let mirror = b1 == reflect_body(&b0);
    let passed = worst <= 1e-12 && vert_err <= 1e-14 && b23.len() == 5 && mirror;
    Ok(Outcome {
        passed,
        measured: worst,
        threshold: 1e-12,
        detail: format!("B(2/3) vertex error {vert_err:.1e}, B(1) = reflect(B(0)): {mirror}"),
        max_seconds: None,
    })
}

fn c5_flow_homotopy() -> Res {
    let prof = |a: f64| -> Result<FlowProfile, String> {
        let v = FlowProfile::sample(1.0, DEFAULT_NODES, |x| 0.75 * (1.0 - x * x) + a * (2.0 * PI * x).sin()).map_err(e)?;
        Ok(renormalize_flux(&v, 1.0))
    };
    let pair = FlowShapePair::new(prof(0.1)?, prof(-0.05)?, 0).map_err(e)?;
    let class = FlowClassParams::new(8.0, 0, 1.0).map_err(e)?;
    let (f_in, f_out) = (flux(&pair.v_in), flux(&pair.v_out));
    let mut worst = 0.0f64;
    let mut admissible = true;
    for k in 0..=100 {
        let q = flow_homotopy(&pair, k as f64 / 100.0, &class).map_err(e)?;
        worst = worst.max((flux(&q.v_in) - f_in).abs()).max((flux(&q.v_out) - f_out).abs());
        admissible &= is_admissible_flow(&q, &class).admissible;
    }
    let identity = flow_homotopy(&pair, 0.0, &class).map_err(e)? == pair;
    let one = flow_homotopy(&pair, 1.0, &class).map_err(e)?;
    let r = reflect_flow(&pair).map_err(e)?;
    let reflection = one.v_in.nodes() == r.v_in.nodes() && one.v_out.nodes() == r.v_out.nodes();
    Ok(Outcome {
        passed: worst <= 1e-14 && admissible && identity && reflection,
        measured: worst,
        threshold: 1e-14,
        detail: format!("admissible {admissible}, identity {identity}, reflection {reflection}"),
        max_seconds: None,
    })
}

fn c6_bolzano() -> Res {
    let class = FlowClassParams::new(6.0, 0, 1.0).map_err(e)?;
    let pair = class.baseline_pair(1.0, DEFAULT_NODES).map_err(e)?;
    let path = HomotopyPath::diagonal(default_rect(), default_trapezium(), pair, class, 0.5);
    let z = zero_lift_search(&path, &BolzanoConfig::default()).map_err(e)?;
    let strong = z.endpoint_lifts[0].abs() >= 100.0 * z.noise_floor;
    let tol = z.lift_tol;
    Ok(Outcome {
        passed: strong && z.solves <= 25 && z.verified_lift.abs() <= tol,
        measured: z.verified_lift.abs(),
        threshold: tol,
        detail: format!(
            "t = {:.8}, {} solves, endpoint lifts {:.4e} / {:.4e}",
            z.t, z.solves, z.endpoint_lifts[0], z.endpoint_lifts[1]
        ),
        max_seconds: Some(1800.0),
    })
}

/// Boundary/volume gaps on the corner-graded family used for criterion 7.
pub fn evaluator_gaps(sizes: &[f64]) -> Result<Vec<(f64, f64, f64)>, String> {
    let body = default_trapezium().body();
    let pair = poiseuille_pair()?;
    let mut out = Vec::new();
    for &h in sizes {
        let opts = MeshOptions { body_h: Some(h), corner_h: Some(h / 8.0), grading: 0.3, ..MeshOptions::uniform(0.25) };
        let m = generate_mesh(&default_rect(), Some(&body), &opts).map_err(e)?;
        let f = solve_steady_ns(&m, &BoundaryData::new(0.5, pair.clone()).map_err(e)?, &SolverConfig::default())
            .map_err(e)?;
        let (v, b) = (lift_volume(&f).map_err(e)?, lift_boundary(&f).map_err(e)?);
        out.push((h, v, b));
    }
    Ok(out)
}

fn c7_evaluators() -> Res {
    let rows = evaluator_gaps(&[0.1, 0.05, 0.025])?;
    let gaps: Vec<f64> = rows.iter().map(|(_, v, b)| (v - b).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let (_, v, _) = rows[rows.len() - 1];
    let rel = gaps[gaps.len() - 1] / v.abs();
    let detail = rows.iter().map(|(h, v, b)| format!("h={h}: {:.2}%", 100.0 * (v - b).abs() / v.abs())).collect::<Vec<_>>();
    Ok(Outcome {
        passed: monotone && rel <= 0.05,
        measured: rel,
        threshold: 0.05,
        detail: format!("{}; monotone {monotone}", detail.join(", ")),
        max_seconds: None,
    })
}

fn c8_continuity() -> Res {
    let base = ProbeBase { rect: default_rect(), body: default_trapezium().body(), pair: poiseuille_pair()? };
    let cfg = ContinuityConfig::default();
    let flow = continuity_probe(ProbeKind::Flow, &base, &[0.1, 0.05, 0.025], &cfg).map_err(e)?;
    let body = continuity_probe(ProbeKind::Body, &base, &[0.02, 0.01, 0.005], &cfg).map_err(e)?;
    let fmt = |t: &crate::stability::ContinuityTable| {
        t.rows.iter().map(|r| r.difference.map_or("failed".into(), |d| format!("{d:.3e}"))).collect::<Vec<_>>().join(" > ")
    };
    let worst_ratio = flow.ratios.iter().chain(&body.ratios).cloned().fold(0.0, f64::max);
    Ok(Outcome {
        passed: flow.monotone && body.monotone,
        measured: worst_ratio,
        threshold: 1.0,
        detail: format!("flow {}, body {}", fmt(&flow), fmt(&body)),
        max_seconds: None,
    })
}

/// γ settings for the acceptance runs: default mesh and grid, short budget.
pub fn acceptance_gamma() -> GammaConfig {
    GammaConfig { search: NelderMead { max_evals: 12, ..GammaConfig::default().search }, ..GammaConfig::default() }
}

fn c9_gamma_monotone() -> Res {
    let body = default_trapezium().body();
    let cfg = acceptance_gamma();
    let g3 = gamma_estimate(&default_rect(), &body, &FlowClassParams::new(3.0, 1, 1.0).map_err(e)?, 1.0, &cfg).map_err(e)?;
    let g6 = gamma_estimate(&default_rect(), &body, &FlowClassParams::new(6.0, 1, 1.0).map_err(e)?, 1.0, &cfg).map_err(e)?;
    Ok(Outcome {
        passed: g3.value <= g6.value,
        measured: g3.value,
        threshold: g6.value,
        detail: format!("r=3: {:.6e}, r=6: {:.6e} ({} evaluations each)", g3.value, g6.value, cfg.search.max_evals),
        max_seconds: None,
    })
}

fn c10_energy() -> Res {
    let m = mesh_for_body(&default_rect(), &default_trapezium().body(), &MeshOptions::uniform(1.0 / 6.0)).map_err(e)?;
    let solver = NsSolver::new(Arc::new(m), SolverConfig::default()).map_err(e)?;
    let pair = poiseuille_pair()?;
    let mut ratios = Vec::new();
    for l in [0.1, 0.2, 0.4] {
        let f = solver.solve(&BoundaryData::new(l, pair.clone()).map_err(e)?).map_err(e)?;
        ratios.push(dirichlet_energy(&f) / l);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let var = hi / lo - 1.0;
    Ok(Outcome::below(var, 0.25, format!("‖∇u‖/λ = {ratios:.5?}")))
}

fn c11_oracle() -> Res {
    let square = BodyShape::rectangle(-0.3, 0.3, -0.3, 0.3).map_err(e)?;
    let thin = BodyShape::rectangle(-0.9, 0.9, -0.1, 0.1).map_err(e)?;
    let rect = default_rect();
    let bc = BodyClass::new(&rect, ConfinementBox { half_width: 2.0, half_height: 0.5 }, 0.36).map_err(e)?;
    let class = FlowClassParams::new(6.0, 0, 1.0).map_err(e)?;
    let gamma = GammaConfig { search: NelderMead { max_evals: 6, ..GammaConfig::default().search }, ..GammaConfig::default() };
    let cfg = ShapeOptConfig { generations: 0, gamma: gamma.clone(), ..ShapeOptConfig::default() };
    let space = ShapeSpace::Discrete { shapes: vec![square.clone(), thin.clone()] };
    let r = optimize_body(&rect, &bc, &class, 1.0, &space, &cfg).map_err(e)?;
    let gs = gamma_estimate(&rect, &square, &class, 1.0, &gamma).map_err(e)?.value;
    let gt = gamma_estimate(&rect, &thin, &class, 1.0, &gamma).map_err(e)?.value;
    let winner = if gs <= gt { &square } else { &thin };
    Ok(Outcome {
        passed: &r.best == winner && r.gamma == gs.min(gt),
        measured: r.gamma,
        threshold: gs.min(gt),
        detail: format!("square {gs:.6e}, thin {gt:.6e}, chose {}", if r.best == square { "square" } else { "thin" }),
        max_seconds: None,
    })
}
