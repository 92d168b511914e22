use std::sync::Arc;

use liftlab::flowshape::{reflect_flow, renormalize_flux, FlowProfile, FlowShapePair, DEFAULT_NODES};
use liftlab::geometry::{BodyShape, Rect, TrapeziumParams};
use liftlab::lift::*;
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

fn skewed_pair() -> FlowShapePair {
    let vin = FlowProfile::poiseuille(1.0, DEFAULT_NODES).unwrap();
    let vout =
        FlowProfile::sample(1.0, DEFAULT_NODES, |x| 0.75 * (1.0 - x * x) + 0.3 * (std::f64::consts::PI * x).sin()).unwrap();
    FlowShapePair::new(vin, renormalize_flux(&vout, 1.0), 0).unwrap()
}

fn trapezium_mesh(h: f64) -> Mesh {
    let p = TrapeziumParams::new(0.6, 0.15, 0.3).unwrap();
    generate_mesh(&rect(), Some(&p.body()), &MeshOptions::uniform(h)).unwrap()
}

fn solve(m: &Mesh, lambda: f64, pair: &FlowShapePair) -> FlowField {
    solve_steady_ns(m, &BoundaryData::new(lambda, pair.clone()).unwrap(), &SolverConfig::default()).unwrap()
}

#[test]
fn zero_magnitude_gives_zero_lift() {
    let m = trapezium_mesh(0.25);
    let f = solve(&m, 0.0, &skewed_pair());
    assert_eq!(lift_boundary(&f).unwrap(), 0.0);
    assert_eq!(lift_volume(&f).unwrap(), 0.0);
}

#[test]
fn channel_without_body_is_rejected() {
    let m = generate_mesh(&rect(), None, &MeshOptions::uniform(0.5)).unwrap();
    let f = solve(&m, 0.5, &poiseuille_pair());
    assert_eq!(lift_boundary(&f), Err(LiftError::NoBody));
    assert_eq!(lift_volume(&f), Err(LiftError::NoBody));
    assert!(matches!(lift_curve(&m, &poiseuille_pair(), &[0.5], &SolverConfig::default()), Err(LiftError::NoBody)));
}

#[test]
fn symmetric_configuration_has_no_lift() {
    let body = BodyShape::rectangle(-0.5, 0.5, -0.2, 0.2).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.2).mirrored()).unwrap();
    let pair = poiseuille_pair();
    let f = solve(&m, 0.5, &pair);
    let scale = force_scale(&m, &pair, 0.5);
    assert!(lift_volume(&f).unwrap().abs() <= 1e-8 * scale, "{}", lift_volume(&f).unwrap());
    assert!(lift_boundary(&f).unwrap().abs() <= 1e-8 * scale, "{}", lift_boundary(&f).unwrap());
}

#[test]
fn reflection_flips_the_sign() {
    let m = trapezium_mesh(0.25);
    let pair = skewed_pair();
    let f = solve(&m, 0.5, &pair);
    let g = solve(&reflect_mesh(&m), 0.5, &reflect_flow(&pair).unwrap());
    let (a, b) = (lift_volume(&f).unwrap(), lift_volume(&g).unwrap());
    assert!(a.abs() > 1e-3);
    assert!((a + b).abs() <= 1e-10 * a.abs(), "{a} {b}");
    let (a, b) = (lift_boundary(&f).unwrap(), lift_boundary(&g).unwrap());
    assert!((a + b).abs() <= 1e-10 * a.abs(), "{a} {b}");
}

#[test]
fn test_extension_does_not_matter() {
    let m = trapezium_mesh(0.2);
    let f = solve(&m, 0.5, &skewed_pair());
    let a = lift_volume(&f).unwrap();
    for width in [0.1, 0.3, 1.0] {
        let b = lift_volume_with(&f, TestExtension::Graded { width }).unwrap();
        assert!((a - b).abs() <= 10.0 * SolverConfig::default().newton_tol, "width {width}: {a} vs {b}");
    }
}

#[test]
fn test_extension_also_holds_for_skew_convection() {
    let m = trapezium_mesh(0.25);
    let cfg = SolverConfig { convection: ConvectionForm::Skew, ..SolverConfig::default() };
    let f = solve_steady_ns(&m, &BoundaryData::new(0.5, skewed_pair()).unwrap(), &cfg).unwrap();
    let a = lift_volume(&f).unwrap();
    let b = lift_volume_with(&f, TestExtension::Graded { width: 0.5 }).unwrap();
    assert!((a - b).abs() <= 10.0 * cfg.newton_tol, "{a} vs {b}");
}

#[test]
fn evaluators_agree_roughly_on_a_smooth_body() {
    let circle: Vec<[f64; 2]> = (0..48)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 48.0;
            [0.3 * t.cos(), 0.1 + 0.3 * t.sin()]
        })
        .collect();
    let body = BodyShape::new(circle).unwrap();
    let opts = MeshOptions { body_h: Some(0.05), ..MeshOptions::uniform(0.25) };
    let m = generate_mesh(&rect(), Some(&body), &opts).unwrap();
    let f = solve(&m, 0.5, &poiseuille_pair());
    let (v, b) = (lift_volume(&f).unwrap(), lift_boundary(&f).unwrap());
    assert!(v < 0.0, "{v}");
    assert!((v - b).abs() <= 0.1 * v.abs(), "{v} vs {b}");
}

fn random_field(space: &Arc<TaylorHood>, rng: &mut ChaCha8Rng) -> FlowField {
    let velocity = (0..space.n_velocity_nodes()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let pressure = (0..space.n_pressure_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FlowField::from_parts(space.clone(), velocity, pressure, 1.0)
}

#[test]
fn frozen_convection_lift_is_linear() {
    let m = Arc::new(trapezium_mesh(0.25));
    let space = Arc::new(TaylorHood::new(m));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (f1, f2, w) = (random_field(&space, &mut rng), random_field(&space, &mut rng), random_field(&space, &mut rng));
    let sum = FlowField::from_parts(
        space.clone(),
        f1.velocity.iter().zip(&f2.velocity).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect(),
        f1.pressure.iter().zip(&f2.pressure).map(|(a, b)| a + b).collect(),
        1.0,
    );
    for ext in [TestExtension::Minimal, TestExtension::Graded { width: 0.4 }] {
        let l1 = lift_functional(&f1, &w.velocity, ext).unwrap();
        let l2 = lift_functional(&f2, &w.velocity, ext).unwrap();
        let l12 = lift_functional(&sum, &w.velocity, ext).unwrap();
        assert!((l12 - l1 - l2).abs() <= 1e-12 * (l1.abs() + l2.abs()), "{l12} vs {}", l1 + l2);
        let l3 = lift_functional(&f1, &w.velocity, ext).unwrap();
        let scaled = FlowField::from_parts(
            space.clone(),
            f1.velocity.iter().map(|a| [2.5 * a[0], 2.5 * a[1]]).collect(),
            f1.pressure.iter().map(|a| 2.5 * a).collect(),
            1.0,
        );
        let l4 = lift_functional(&scaled, &w.velocity, ext).unwrap();
        assert!((l4 - 2.5 * l3).abs() <= 1e-12 * l4.abs());
    }
}

#[test]
fn zero_grid_gives_the_origin() {
    let m = trapezium_mesh(0.25);
    let c = lift_curve(&m, &skewed_pair(), &[0.0, 0.0], &SolverConfig::default()).unwrap();
    assert_eq!(c.lambdas, vec![0.0]);
    assert_eq!(c.lifts, vec![0.0]);
    assert_eq!(c.sup_norm(), 0.0);
    assert!(c.failure.is_none());
}

#[test]
fn invalid_grids_are_rejected() {
    let m = trapezium_mesh(0.25);
    for bad in [-0.1, f64::NAN, f64::INFINITY] {
        assert!(matches!(
            lift_curve(&m, &skewed_pair(), &[0.1, bad], &SolverConfig::default()),
            Err(LiftError::InvalidGrid(_))
        ));
    }
}

#[test]
fn curve_is_sorted_and_exports_roundtrip() {
    let m = trapezium_mesh(0.25);
    let c = lift_curve(&m, &skewed_pair(), &[0.4, 0.2, 0.4], &SolverConfig::default()).unwrap();
    assert_eq!(c.lambdas, vec![0.0, 0.2, 0.4]);
    assert_eq!(c.lifts[0], 0.0);
    assert!(c.lifts[1..].iter().all(|l| l.abs() > 0.0));
    let back = LiftCurve::from_csv(&c.to_csv()).unwrap();
    assert_eq!(back.lambdas, c.lambdas);
    assert_eq!(back.lifts, c.lifts);
    assert_eq!(back.residuals, c.residuals);
    let json: LiftCurve = serde_json::from_str(&c.to_json()).unwrap();
    assert_eq!(json, c);
    assert!(LiftCurve::from_csv("lambda,lift\n0,0\n").is_err());
    assert!(LiftCurve::from_csv("lambda,lift,residual\n0,x,0\n").is_err());
}

#[test]
fn cold_and_warm_curves_agree() {
    let m = trapezium_mesh(0.25);
    let solver = NsSolver::new(Arc::new(m), SolverConfig::default()).unwrap();
    let grid = [0.2, 0.4, 0.6];
    let warm = lift_curve_on(&solver, &skewed_pair(), &grid, true).unwrap();
    let cold = lift_curve_on(&solver, &skewed_pair(), &grid, false).unwrap();
    assert_eq!(warm.lambdas, cold.lambdas);
    for (a, b) in warm.lifts.iter().zip(&cold.lifts) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-12), "{a} vs {b}");
    }
}

#[test]
fn solver_failure_truncates_the_curve() {
    let m = trapezium_mesh(0.25);
    let cfg = SolverConfig { max_newton_iters: 3, picard_iters: 0, max_step_halvings: 0, ..SolverConfig::default() };
    let grid = [0.0, 0.1, 60.0, 200.0];
    let c = lift_curve(&m, &skewed_pair(), &grid, &cfg).unwrap();
    let n = c.len();
    assert!(n < grid.len());
    assert_eq!(c.lambdas, grid[..n]);
    assert_eq!(c.lifts.len(), n);
    let msg = c.failure.expect("failure recorded");
    assert!(msg.contains(&format!("lambda = {}", grid[n])), "{msg}");
}

#[test]
fn lift_is_lipschitz_in_magnitude() {
    let m = trapezium_mesh(0.25);
    let pair = skewed_pair();
    let fine: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
    let c = lift_curve(&m, &pair, &fine, &SolverConfig::default()).unwrap();
    let k = c.lambdas.windows(2).zip(c.lifts.windows(2)).map(|(l, v)| (v[1] - v[0]).abs() / (l[1] - l[0])).fold(0.0, f64::max);
    let coarse = lift_curve(&m, &pair, &[0.15, 0.45, 0.75], &SolverConfig::default()).unwrap();
    for i in 0..coarse.len() {
        for j in 0..i {
            let dl = coarse.lambdas[i] - coarse.lambdas[j];
            assert!((coarse.lifts[i] - coarse.lifts[j]).abs() <= 1.5 * k * dl, "K = {k}, pair {j},{i}");
        }
    }
}

#[test]
fn symmetric_baseline_curve_is_flat() {
    let body = BodyShape::rectangle(-0.5, 0.5, -0.2, 0.2).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.25).mirrored()).unwrap();
    let pair = poiseuille_pair();
    let c = lift_curve(&m, &pair, &[0.25, 0.5, 0.75], &SolverConfig::default()).unwrap();
    assert_eq!(c.len(), 4);
    assert!(c.sup_norm() <= 1e-8 * force_scale(&m, &pair, 0.75), "{}", c.sup_norm());
}

#[test]
fn force_scale_grows_with_magnitude() {
    let m = trapezium_mesh(0.25);
    let pair = poiseuille_pair();
    assert_eq!(force_scale(&m, &pair, 0.0), 0.0);
    assert!(force_scale(&m, &pair, 1.0) > force_scale(&m, &pair, 0.5));
}
