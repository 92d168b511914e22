use std::sync::Arc;

use liftlab::flowshape::{FlowClassParams, FlowProfile, FlowShapePair, DEFAULT_NODES};
use liftlab::geometry::{
    hausdorff_distance, is_admissible_body, reflect_body, BodyClass, BodyShape, ConfinementBox, Rect, TrapeziumParams,
};
use liftlab::mesh::{generate_mesh, reflect_mesh, MeshOptions};
use liftlab::ns_solver::{NsSolver, SolverConfig};
use liftlab::optim::NelderMead;
use liftlab::stability::*;
use proptest::prelude::*;

fn rect() -> Rect {
    Rect::new(5.0, 1.0).unwrap()
}

fn trapezium() -> TrapeziumParams {
    TrapeziumParams::new(0.6, 0.15, 0.3).unwrap()
}

fn class(r: f64, u: u8) -> FlowClassParams {
    FlowClassParams::new(r, u, 1.0).unwrap()
}

fn centred_rectangle() -> BodyShape {
    BodyShape::rectangle(-0.6, 0.6, -0.15, 0.15).unwrap()
}

fn body_class(alpha: f64) -> BodyClass {
    BodyClass::new(&rect(), ConfinementBox { half_width: 2.0, half_height: 0.5 }, alpha).unwrap()
}

/// Cheap γ settings: coarse mesh, short λ grid, a handful of evaluations.
fn quick_gamma(evals: usize) -> GammaConfig {
    GammaConfig {
        grid: LambdaGrid { coarse: 5, passes: 1, refine: 2 },
        search: NelderMead { max_evals: evals, ..GammaConfig::default().search },
        mesh: MeshOptions::uniform(0.25),
        ..GammaConfig::default()
    }
}

fn poiseuille_path() -> HomotopyPath {
    let c = class(6.0, 0);
    let pair = c.baseline_pair(1.0, DEFAULT_NODES).unwrap();
    HomotopyPath::diagonal(rect(), trapezium(), pair, c, 0.5)
}

#[test]
fn bolzano_finds_a_verified_zero_within_budget() {
    let cfg = BolzanoConfig::default();
    let z = zero_lift_search(&poiseuille_path(), &cfg).unwrap();
    assert!(z.endpoint_lifts[0].signum() != z.endpoint_lifts[1].signum());
    assert!(z.endpoint_lifts[0].abs() >= 100.0 * z.noise_floor);
    assert!(z.solves <= 25, "{} solves", z.solves);
    assert!(z.lift.abs() <= z.lift_tol);
    assert!(z.verified_lift.abs() <= 2.0 * z.lift_tol);
    assert_eq!((z.eps, z.delta), (z.t, z.t));
    // each bisection step halves the bracket and keeps the root inside
    let mut width = 1.0;
    for s in &z.steps {
        let w = s.bracket[1] - s.bracket[0];
        assert!((w - 0.5 * width).abs() <= 1e-15);
        width = w;
    }
    assert!(z.steps.last().unwrap().bracket[0] <= z.t && z.t <= z.steps.last().unwrap().bracket[1]);
}

#[test]
fn illinois_reaches_the_same_root_with_fewer_solves() {
    let bis = zero_lift_search(&poiseuille_path(), &BolzanoConfig::default()).unwrap();
    let cfg = BolzanoConfig { method: RootMethod::Illinois, ..BolzanoConfig::default() };
    let ill = zero_lift_search(&poiseuille_path(), &cfg).unwrap();
    assert!(ill.solves < bis.solves);
    assert!((ill.t - bis.t).abs() < 1e-5);
}

#[test]
fn symmetric_configuration_has_no_sign_change() {
    let c = class(6.0, 0);
    let path = HomotopyPath {
        rect: rect(),
        body: BodyPath::Fixed { body: centred_rectangle() },
        pair: c.baseline_pair(1.0, DEFAULT_NODES).unwrap(),
        class: c,
        lambda: 0.5,
        shape: PathShape::Diagonal,
    };
    let cfg = BolzanoConfig { mesh: MeshOptions::uniform(0.25), ..BolzanoConfig::default() };
    match zero_lift_search(&path, &cfg) {
        Err(StabilityError::NoSignChange(msg)) => assert!(msg.contains("noise floor"), "{msg}"),
        other => panic!("expected NoSignChange, got {other:?}"),
    }
}

#[test]
fn search_rejects_nonzero_u_and_tiny_budgets() {
    let c = class(6.0, 1);
    let path = HomotopyPath::diagonal(rect(), trapezium(), c.baseline_pair(1.0, DEFAULT_NODES).unwrap(), c, 0.5);
    assert!(matches!(zero_lift_search(&path, &BolzanoConfig::default()), Err(StabilityError::InvalidPath(_))));

    let cfg = BolzanoConfig { max_solves: 5, ..BolzanoConfig::default() };
    match zero_lift_search(&poiseuille_path(), &cfg) {
        Err(StabilityError::NotConverged { solves, .. }) => assert!(solves <= 5),
        other => panic!("expected NotConverged, got {other:?}"),
    }
}

#[test]
fn path_lift_is_continuous_and_keeps_its_sign_at_the_collapse() {
    let ev = PathEvaluator::new(&poiseuille_path(), &BolzanoConfig::default()).unwrap();
    let (a, b) = (ev.lift_at(0.2).unwrap(), ev.lift_at(0.2 + 1e-4).unwrap());
    assert!((a - b).abs() < 1e-3 * a.abs(), "{a} vs {b}");
    // the collapsed mesh at t = 0 is not the limit of the sliver meshes, but
    // the sign the search relies on is the same
    let (l0, l1) = (ev.lift_at(0.0).unwrap(), ev.lift_at(1e-4).unwrap());
    assert_eq!(l0.signum(), l1.signum());
    assert!((l0 - l1).abs() < 0.2 * l1.abs(), "{l0} vs {l1}");
}

#[test]
fn single_evaluation_gamma_is_the_baseline_sup() {
    let body = trapezium().body();
    let c = class(6.0, 0);
    let cfg = quick_gamma(1);
    let mesh = generate_mesh(&rect(), Some(&body), &cfg.mesh).unwrap();
    let g = gamma_estimate_on(&mesh, &c, 1.0, &cfg).unwrap();
    let solver = NsSolver::new(Arc::new(mesh), SolverConfig::default()).unwrap();
    let curve = adaptive_lift_curve(&solver, &c.baseline_pair(1.0, DEFAULT_NODES).unwrap(), 1.0, &cfg.grid).unwrap();
    assert_eq!(g.evaluations, 1);
    assert_eq!(g.value, curve.sup_norm());
    assert_eq!(g.value, g.baseline_value);
    assert_eq!(g.trace.len(), 1);
}

#[test]
fn gamma_grows_with_the_norm_budget() {
    let body = trapezium().body();
    let cfg = quick_gamma(6);
    let g3 = gamma_estimate(&rect(), &body, &class(3.0, 1), 1.0, &cfg).unwrap();
    let g6 = gamma_estimate(&rect(), &body, &class(6.0, 1), 1.0, &cfg).unwrap();
    assert!(g3.value <= g6.value, "{} > {}", g3.value, g6.value);
    assert!(g3.argmax_pair.norm() <= 3.0 + 1e-12);
}

#[test]
fn odd_components_lift_a_symmetric_body() {
    let cfg = quick_gamma(6);
    let g = gamma_estimate(&rect(), &centred_rectangle(), &class(6.0, 0), 1.0, &cfg).unwrap();
    assert!(g.baseline_value < 1e-8 * g.value.max(1e-300));
    assert!(g.value > g.baseline_value);
    assert!(!g.argmax_pair.is_even());
}

#[test]
fn gamma_is_reflection_invariant() {
    let body = trapezium().body();
    let cfg = quick_gamma(5);
    let mesh = generate_mesh(&rect(), Some(&body), &cfg.mesh).unwrap();
    let g = gamma_estimate_on(&mesh, &class(6.0, 0), 1.0, &cfg).unwrap();
    let mut mirrored = cfg.clone();
    mirrored.basis.mirror = true;
    let rm = reflect_mesh(&mesh);
    assert!(hausdorff_distance(rm.body().unwrap(), &reflect_body(&body)) < 1e-14);
    let gr = gamma_estimate_on(&rm, &class(6.0, 0), 1.0, &mirrored).unwrap();
    assert!((g.value - gr.value).abs() <= 1e-8 * g.value, "{} vs {}", g.value, gr.value);
}

#[test]
fn gamma_is_invariant_under_relabeling() {
    let body = trapezium().body();
    let cfg = quick_gamma(5);
    let mesh = generate_mesh(&rect(), Some(&body), &cfg.mesh).unwrap();
    let g = gamma_estimate_on(&mesh, &class(6.0, 0), 1.0, &cfg).unwrap();
    let mut relabeled = cfg.clone();
    let dim = cfg.basis.dim();
    relabeled.basis.relabel = Some((0..dim).map(|j| (j * 5 + 3) % dim).collect());
    let gr = gamma_estimate_on(&mesh, &class(6.0, 0), 1.0, &relabeled).unwrap();
    assert_eq!(g.value, gr.value);
    assert_ne!(g.parameterization_id, gr.parameterization_id);
}

#[test]
fn gamma_rejects_infeasible_classes_and_bad_relabels() {
    let body = trapezium().body();
    let tight = FlowClassParams { r: 1.0, ..class(6.0, 0) };
    let r = gamma_estimate(&rect(), &body, &tight, 1.0, &quick_gamma(1));
    assert!(matches!(r, Err(StabilityError::InfeasibleClass(_))), "{r:?}");

    let mut cfg = quick_gamma(1);
    cfg.basis.relabel = Some(vec![0; cfg.basis.dim()]);
    assert!(matches!(gamma_estimate(&rect(), &body, &class(6.0, 0), 1.0, &cfg), Err(StabilityError::InvalidConfig(_))));
}

#[test]
fn projection_clips_bodies_too_long_for_the_box() {
    let bc = body_class(0.36);
    let long = [[-3.0, -0.01], [3.0, -0.01], [3.0, 0.01], [-3.0, 0.01]];
    let b = project_to_class(&long, &bc, 200).unwrap();
    assert!(is_admissible_body(&b, &bc).admissible);
    let (lo, hi) = b.bbox();
    assert!(hi[0] - lo[0] <= 4.0 && hi[1] - lo[1] > 0.02);

    let impossible = body_class(3.9);
    let r = project_to_class(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.1]], &impossible, 3);
    assert!(matches!(r, Err(StabilityError::ProjectionFailed(3))), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn projection_lands_in_the_class(
        pts in prop::collection::vec((-4.0f64..4.0, -1.5f64..1.5), 3..12),
        alpha in 0.05f64..1.5,
    ) {
        let points: Vec<_> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let bc = body_class(alpha);
        // collinear draws have no hull; anything else must project
        if let Ok(b) = project_to_class(&points, &bc, 200) {
            prop_assert!(is_admissible_body(&b, &bc).admissible);
        }
    }
}

fn quick_shape(generations: usize) -> ShapeOptConfig {
    let gamma = GammaConfig { mesh: MeshOptions::uniform(0.2), ..quick_gamma(2) };
    ShapeOptConfig { generations, offspring: 2, gamma, ..ShapeOptConfig::default() }
}

#[test]
fn zero_generations_return_the_projected_initial_body() {
    let body = trapezium().body();
    let bc = body_class(body.area());
    let space = ShapeSpace::Polygon { vertices: 8, initial: Some(body) };
    let r = optimize_body(&rect(), &bc, &class(6.0, 0), 1.0, &space, &quick_shape(0)).unwrap();
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.history[0].body.as_ref(), Some(&r.best));
    assert!(r.feasibility.admissible);
    let direct = gamma_estimate(&rect(), &r.best, &class(6.0, 0), 1.0, &quick_shape(0).gamma).unwrap();
    assert_eq!(r.gamma, direct.value);
}

#[test]
fn polygon_search_is_monotone_and_admissible() {
    let bc = body_class(0.36);
    let space = ShapeSpace::Polygon { vertices: 6, initial: None };
    let r = optimize_body(&rect(), &bc, &class(6.0, 0), 1.0, &space, &quick_shape(2)).unwrap();
    assert_eq!(r.history.len(), 5);
    for w in r.history.windows(2) {
        assert!(w[1].best_so_far <= w[0].best_so_far);
    }
    for it in &r.history {
        if let Some(b) = &it.body {
            assert!(it.admissible && is_admissible_body(b, &bc).admissible);
        }
    }
    assert_eq!(r.gamma, r.history.last().unwrap().best_so_far);
}

#[test]
fn discrete_search_matches_exhaustive_evaluation() {
    let square = BodyShape::rectangle(-0.3, 0.3, -0.3, 0.3).unwrap();
    let thin = BodyShape::rectangle(-0.9, 0.9, -0.1, 0.1).unwrap();
    let bc = body_class(0.36);
    let c = class(6.0, 0);
    let cfg = quick_shape(0);
    let space = ShapeSpace::Discrete { shapes: vec![square.clone(), thin.clone()] };
    let r = optimize_body(&rect(), &bc, &c, 1.0, &space, &cfg).unwrap();
    let gs = gamma_estimate(&rect(), &square, &c, 1.0, &cfg.gamma).unwrap().value;
    let gt = gamma_estimate(&rect(), &thin, &c, 1.0, &cfg.gamma).unwrap().value;
    let winner = if gs <= gt { &square } else { &thin };
    assert_eq!(&r.best, winner);
    assert_eq!(r.gamma, gs.min(gt));

    let bad = ShapeSpace::Discrete { shapes: vec![BodyShape::rectangle(-0.1, 0.1, -0.1, 0.1).unwrap()] };
    assert!(matches!(optimize_body(&rect(), &bc, &c, 1.0, &bad, &cfg), Err(StabilityError::InvalidConfig(_))));
}

fn probe_base() -> ProbeBase {
    let vin = FlowProfile::poiseuille(1.0, DEFAULT_NODES).unwrap();
    ProbeBase { rect: rect(), body: trapezium().body(), pair: FlowShapePair::new(vin.clone(), vin, 0).unwrap() }
}

fn quick_probe() -> ContinuityConfig {
    ContinuityConfig { mesh: MeshOptions::uniform(0.25), ..ContinuityConfig::default() }
}

#[test]
fn zero_perturbation_gives_zero_difference() {
    for kind in [ProbeKind::Flow, ProbeKind::Body] {
        let t = continuity_probe(kind, &probe_base(), &[0.0], &quick_probe()).unwrap();
        assert_eq!(t.rows[0].difference, Some(0.0));
        assert!(t.passed);
    }
}

#[test]
fn flow_perturbations_shrink_linearly() {
    let t = continuity_probe(ProbeKind::Flow, &probe_base(), &[0.1, 0.05, 0.025], &quick_probe()).unwrap();
    assert!(t.monotone && t.passed, "{t:?}");
    for r in &t.ratios {
        assert!((0.3..=0.7).contains(r), "ratio {r}");
    }
}

#[test]
fn body_perturbations_shrink() {
    let t = continuity_probe(ProbeKind::Body, &probe_base(), &[0.02, 0.01, 0.005], &quick_probe()).unwrap();
    assert!(t.monotone && t.passed, "{t:?}");
    assert!(t.to_csv().lines().count() == 4);
}

#[test]
fn probe_rejects_increasing_sizes() {
    let r = continuity_probe(ProbeKind::Flow, &probe_base(), &[0.01, 0.1], &quick_probe());
    assert!(matches!(r, Err(StabilityError::InvalidConfig(_))));
}
