use std::collections::HashMap;
use std::sync::Arc;

use liftlab::flowshape::{reflect_flow, renormalize_flux, FlowProfile, FlowShapePair, DEFAULT_NODES};
use liftlab::geometry::{body_family, reflect_body, Rect, TrapeziumParams};
use liftlab::mesh::{generate_mesh, reflect_mesh, Mesh, MeshOptions};
use liftlab::ns_solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rect() -> Rect {
    Rect::new(5.0, 1.0).unwrap()
}

fn poiseuille_pair() -> FlowShapePair {
    let p = FlowProfile::poiseuille(1.0, DEFAULT_NODES).unwrap();
    FlowShapePair::new(p.clone(), p, 0).unwrap()
}

fn couette_pair() -> FlowShapePair {
    let p = FlowProfile::couette(1.0, DEFAULT_NODES).unwrap();
    FlowShapePair::new(p.clone(), p, 1).unwrap()
}

/// Even inflow, outflow with an odd component: a non-symmetric pair in F_{r,0}.
fn skewed_pair() -> FlowShapePair {
    let h = 1.0;
    let vin = FlowProfile::poiseuille(h, DEFAULT_NODES).unwrap();
    let vout = FlowProfile::sample(h, DEFAULT_NODES, |x| {
        0.75 * (1.0 - x * x) + 0.3 * (std::f64::consts::PI * x).sin()
    })
    .unwrap();
    FlowShapePair::new(vin, renormalize_flux(&vout, 1.0), 0).unwrap()
}

fn empty_mesh(h: f64) -> Mesh {
    generate_mesh(&rect(), None, &MeshOptions::uniform(h)).unwrap()
}

fn trapezium_mesh(h: f64) -> Mesh {
    let p = TrapeziumParams::new(0.6, 0.15, 0.3).unwrap();
    generate_mesh(&rect(), Some(&p.body()), &MeshOptions::uniform(h)).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn zero_data_gives_zero_field() {
    let m = trapezium_mesh(0.25);
    let f = solve_steady_ns(&m, &BoundaryData::new(0.0, skewed_pair()).unwrap(), &cfg()).unwrap();
    assert!(f.velocity.iter().flatten().all(|&v| v == 0.0));
    assert!(f.pressure.iter().all(|&v| v == 0.0));
    assert_eq!(dirichlet_energy(&f), 0.0);
}

#[test]
fn poiseuille_is_reproduced_exactly() {
    let m = empty_mesh(1.0 / 8.0);
    for lambda in [0.5, 1.0, 10.0] {
        let f = solve_steady_ns(&m, &BoundaryData::new(lambda, poiseuille_pair()).unwrap(), &cfg()).unwrap();
        let nodes = f.space().nodes();
        let umax = 0.75 * lambda;
        for (p, u) in nodes.iter().zip(&f.velocity) {
            let exact = 0.75 * lambda * (1.0 - p[1] * p[1]);
            assert!((u[0] - exact).abs() <= 1e-9 * umax, "{p:?}: {} vs {exact}", u[0]);
            assert!(u[1].abs() <= 1e-9 * umax);
        }
        let pmax = 1.5 * lambda * 5.0;
        for (p, q) in m.nodes().iter().zip(&f.pressure) {
            let exact = -1.5 * lambda * p[0];
            assert!((q - exact).abs() <= 1e-9 * pmax, "{p:?}: {q} vs {exact}");
        }
    }
}

#[test]
fn couette_shear_is_reproduced_exactly() {
    let m = empty_mesh(1.0 / 8.0);
    let f = solve_steady_ns(&m, &BoundaryData::new(1.0, couette_pair()).unwrap(), &cfg()).unwrap();
    for (p, u) in f.space().nodes().iter().zip(&f.velocity) {
        assert!((u[0] - 0.5 * (1.0 + p[1])).abs() <= 1e-9);
        assert!(u[1].abs() <= 1e-9);
    }
    assert!(f.pressure.iter().all(|q| q.abs() <= 1e-9));
}

#[test]
fn pressure_has_zero_mean_and_field_is_divergence_free() {
    let m = trapezium_mesh(0.2);
    let f = solve_steady_ns(&m, &BoundaryData::new(0.8, skewed_pair()).unwrap(), &cfg()).unwrap();
    let pscale = f.pressure.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(f.pressure_integral().abs() <= 1e-12 * pscale * m.area());
    assert!(f.divergence_residual() <= cfg().newton_tol);
    assert!(f.residual <= cfg().newton_tol);
}

#[test]
fn inflow_values_are_imposed_exactly() {
    let m = trapezium_mesh(0.2);
    let pair = skewed_pair();
    let lambda = 0.7;
    let f = solve_steady_ns(&m, &BoundaryData::new(lambda, pair.clone()).unwrap(), &cfg()).unwrap();
    let mut count = 0;
    for (p, u) in f.space().nodes().iter().zip(&f.velocity) {
        if p[0] == -5.0 && p[1].abs() < 1.0 {
            assert_eq!(u[0], lambda * pair.v_in.eval(p[1]));
            assert_eq!(u[1], 0.0);
            count += 1;
        }
        if m.body().unwrap().distance_to_boundary(*p) == 0.0 {
            assert_eq!(*u, [0.0, 0.0]);
        }
    }
    assert!(count > 10);
}

#[test]
fn outflow_correction_is_tiny_for_compatible_data() {
    let m = trapezium_mesh(0.2);
    let pair = skewed_pair();
    let solver = NsSolver::new(Arc::new(m.clone()), cfg()).unwrap();
    let g = solver.dirichlet_values(&BoundaryData::new(1.0, pair.clone()).unwrap());
    for (p, v) in solver.space().nodes().iter().zip(&g) {
        if p[0] == 5.0 && p[1].abs() < 1.0 {
            assert!((v - pair.v_out.eval(p[1])).abs() < 1e-4);
        }
    }
}

/// Match velocity nodes of a mesh and its mirror image by coordinates.
fn mirror_map(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<usize> {
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    let index: HashMap<_, _> = b.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
    a.iter().map(|p| index[&key([p[0], -p[1]])]).collect()
}

#[test]
fn reflected_problem_gives_reflected_field() {
    let p = TrapeziumParams::new(0.6, 0.15, 0.3).unwrap();
    let body = body_family(0.2, &p).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.2)).unwrap();
    let r = reflect_mesh(&m);
    assert_eq!(r.body().unwrap(), &reflect_body(&body));
    let pair = skewed_pair();
    let f = solve_steady_ns(&m, &BoundaryData::new(1.0, pair.clone()).unwrap(), &cfg()).unwrap();
    let g = solve_steady_ns(&r, &BoundaryData::new(1.0, reflect_flow(&pair).unwrap()).unwrap(), &cfg()).unwrap();
    let map = mirror_map(f.space().nodes(), g.space().nodes());
    let scale = f.velocity.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    for (i, j) in map.iter().enumerate() {
        let (u, v) = (f.velocity[i], g.velocity[*j]);
        assert!((u[0] - v[0]).abs() <= 1e-10 * scale);
        assert!((u[1] + v[1]).abs() <= 1e-10 * scale);
    }
    let pscale = f.pressure.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for v in 0..m.nodes().len() {
        assert!((f.pressure[v] - g.pressure[v]).abs() <= 1e-10 * pscale);
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let m = trapezium_mesh(0.2);
    let bd = BoundaryData::new(1.0, skewed_pair()).unwrap();
    let a = solve_steady_ns(&m, &bd, &cfg()).unwrap();
    let b = solve_steady_ns(&m, &bd, &cfg()).unwrap();
    assert_eq!(a.coefficients(), b.coefficients());
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn energy_is_linear_for_poiseuille() {
    let m = empty_mesh(0.25);
    let solver = NsSolver::new(Arc::new(m), cfg()).unwrap();
    let e1 = dirichlet_energy(&solver.solve(&BoundaryData::new(0.3, poiseuille_pair()).unwrap()).unwrap());
    let e2 = dirichlet_energy(&solver.solve(&BoundaryData::new(0.6, poiseuille_pair()).unwrap()).unwrap());
    assert!((e2 / e1 - 2.0).abs() < 1e-8);
    // ‖∇u‖² = 2L ∫ (3λx/2)² dx over [-1, 1] = 15 λ²
    assert!((e1 - 0.3 * 15f64.sqrt()).abs() < 1e-9);
}

#[test]
fn energy_grows_at_most_linearly_around_a_body() {
    let m = trapezium_mesh(0.2);
    let solver = NsSolver::new(Arc::new(m), cfg()).unwrap();
    let ratios: Vec<f64> = [0.1, 0.2, 0.4]
        .iter()
        .map(|&l| dirichlet_energy(&solver.solve(&BoundaryData::new(l, skewed_pair()).unwrap()).unwrap()) / l)
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo < 1.05, "{ratios:?}");
}

#[test]
fn newton_converges_quadratically() {
    let m = trapezium_mesh(0.2);
    let f = solve_steady_ns(&m, &BoundaryData::new(3.0, skewed_pair()).unwrap(), &cfg()).unwrap();
    let log = &f.stats.log;
    let mut checked = 0;
    for w in log.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.step == b.step && b.kind == StepKind::Newton && a.residual <= 1e-2 && a.residual >= 1e-8 {
            assert!(b.residual <= (10.0 * a.residual * a.residual).max(1e-13), "{} -> {}", a.residual, b.residual);
            checked += 1;
        }
    }
    assert!(checked > 0, "{log:?}");
    assert!(f.log_lines().iter().all(|l| l.contains("\"residual\"")));
}

#[test]
fn skew_form_solution_matches_standard_form() {
    let m = trapezium_mesh(0.2);
    let bd = BoundaryData::new(1.0, skewed_pair()).unwrap();
    let a = solve_steady_ns(&m, &bd, &cfg()).unwrap();
    let skew = SolverConfig { convection: ConvectionForm::Skew, ..cfg() };
    let b = solve_steady_ns(&m, &bd, &skew).unwrap();
    assert!(b.residual <= cfg().newton_tol);
    let diff = a.velocity.iter().zip(&b.velocity).map(|(u, v)| (u[0] - v[0]).abs().max((u[1] - v[1]).abs())).fold(0.0, f64::max);
    assert!(diff < 1e-3, "{diff}");
}

#[test]
fn skew_trilinear_form_is_antisymmetric() {
    let m = trapezium_mesh(0.2);
    let f = solve_steady_ns(&m, &BoundaryData::new(1.0, skewed_pair()).unwrap(), &cfg()).unwrap();
    let space = f.space().clone();
    // random fields vanishing on the boundary
    let mut on_boundary = vec![false; space.n_velocity_nodes()];
    for (i, e) in m.boundary().iter().enumerate() {
        on_boundary[e.edge[0]] = true;
        on_boundary[e.edge[1]] = true;
        on_boundary[space.boundary_midpoint(i)] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let mut random = || -> Vec<[f64; 2]> {
            on_boundary.iter().map(|&b| if b { [0.0, 0.0] } else { [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)] }).collect()
        };
        let (g, h) = (random(), random());
        let a = convection_trilinear(&space, ConvectionForm::Skew, &f.velocity, &g, &h);
        let b = convection_trilinear(&space, ConvectionForm::Skew, &f.velocity, &h, &g);
        assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0), "{a} {b}");
        // the standard form is antisymmetric only up to the discrete divergence defect
        let s1 = convection_trilinear(&space, ConvectionForm::Standard, &f.velocity, &g, &h);
        let s2 = convection_trilinear(&space, ConvectionForm::Standard, &f.velocity, &h, &g);
        assert!((s1 + s2).abs() < 0.1 * s1.abs().max(s2.abs()));
    }
}

#[test]
fn data_and_config_errors() {
    let m = trapezium_mesh(0.25);
    let p2 = FlowProfile::poiseuille(2.0, DEFAULT_NODES).unwrap();
    let wrong_h = FlowShapePair::new(p2.clone(), p2, 0).unwrap();
    let bd = BoundaryData::new(1.0, wrong_h).unwrap();
    assert!(matches!(solve_steady_ns(&m, &bd, &cfg()), Err(SolverError::DataMismatch(_))));
    assert!(matches!(BoundaryData::new(-1.0, poiseuille_pair()), Err(SolverError::DataMismatch(_))));
    let mut doubled = poiseuille_pair();
    doubled.v_out = doubled.v_out.scaled(2.0);
    assert!(matches!(BoundaryData::new(1.0, doubled), Err(SolverError::DataMismatch(_))));
    let bad = SolverConfig { newton_tol: 0.0, ..cfg() };
    assert!(matches!(solve_steady_ns(&m, &BoundaryData::new(1.0, poiseuille_pair()).unwrap(), &bad), Err(SolverError::InvalidConfig(_))));
}

#[test]
fn divergence_is_reported_when_newton_cannot_converge() {
    let m = trapezium_mesh(0.25);
    let tight = SolverConfig { max_newton_iters: 1, max_step_halvings: 1, picard_iters: 0, ..cfg() };
    let err = solve_steady_ns(&m, &BoundaryData::new(50.0, skewed_pair()).unwrap(), &tight).unwrap_err();
    assert!(matches!(err, SolverError::Divergence { .. }), "{err:?}");
}

#[test]
fn warm_start_reaches_the_same_solution() {
    let m = trapezium_mesh(0.2);
    let solver = NsSolver::new(Arc::new(m), cfg()).unwrap();
    let a = solver.solve(&BoundaryData::new(1.0, skewed_pair()).unwrap()).unwrap();
    let b = solver.solve_from(&BoundaryData::new(1.2, skewed_pair()).unwrap(), Some(&a)).unwrap();
    let c = solver.solve(&BoundaryData::new(1.2, skewed_pair()).unwrap()).unwrap();
    let diff = b.velocity.iter().zip(&c.velocity).map(|(u, v)| (u[0] - v[0]).abs().max((u[1] - v[1]).abs())).fold(0.0, f64::max);
    assert!(diff < 1e-9);
}

#[test]
fn sobolev_proxy_is_positive_and_cached() {
    let a = empty_rect_sobolev_proxy(&rect());
    let b = empty_rect_sobolev_proxy(&rect());
    assert_eq!(a, b);
    assert!(a > 1.0 && a < 100.0, "{a}");
    // smaller domains have larger embedding constants
    let small = empty_rect_sobolev_proxy(&Rect::new(2.5, 0.5).unwrap());
    assert!(small > a);
}

#[test]
fn lambda_estimate_contracts() {
    let m = trapezium_mesh(0.25);
    let search = LambdaSearch { start: 0.25, cap: 0.5, bisection_steps: 4 };
    let est = estimate_lambda_max(&m, &poiseuille_pair(), &cfg(), &search);
    assert_eq!(est.flag, LambdaFlag::CapLimited);
    assert_eq!(est.lambda_max, 0.5);

    let search = LambdaSearch { start: 0.5, cap: 64.0, bisection_steps: 5 };
    let est = estimate_lambda_max(&m, &poiseuille_pair(), &cfg(), &search);
    assert_eq!(est.flag, LambdaFlag::Bracketed);
    assert!(est.lambda_max >= 0.0 && est.lambda_max < 64.0);
    let mut doubled = poiseuille_pair();
    doubled.v_in = doubled.v_in.scaled(2.0);
    doubled.v_out = doubled.v_out.scaled(2.0);
    let est2 = estimate_lambda_max(&m, &doubled, &cfg(), &search);
    assert!(est2.lambda_max <= est.lambda_max, "{} vs {}", est2.lambda_max, est.lambda_max);
}

#[test]
fn field_json_export() {
    let m = trapezium_mesh(0.25);
    let f = solve_steady_ns(&m, &BoundaryData::new(0.5, poiseuille_pair()).unwrap(), &cfg()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
    assert_eq!(v["mesh_ref"], serde_json::Value::from(m.fingerprint()));
    assert_eq!(v["velocity"].as_array().unwrap().len(), f.velocity.len());
    assert_eq!(v["pressure"].as_array().unwrap().len(), m.nodes().len());
    assert_eq!(f.to_bytes().len(), 8 * (2 * f.velocity.len() + f.pressure.len()));
}
