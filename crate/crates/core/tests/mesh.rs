use liftlab::geometry::{body_family, body_family_raw, BodyShape, Point, Rect, TrapeziumParams};
use liftlab::mesh::*;
use proptest::prelude::*;

fn rect() -> Rect {
    Rect::new(5.0, 1.0).unwrap()
}

fn trapezium() -> TrapeziumParams {
    TrapeziumParams::new(0.6, 0.15, 0.3).unwrap()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn len(m: &Mesh, e: &BoundaryEdge) -> f64 {
    let [a, b] = e.edge.map(|v| m.nodes()[v]);
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn tag_length(m: &Mesh, tag: BoundaryTag) -> f64 {
    m.boundary().iter().filter(|e| e.tag == tag).map(|e| len(m, e)).sum()
}

/// Checks shared by every generated mesh.
fn check_mesh(m: &Mesh) {
    for t in m.triangles() {
        let [a, b, c] = t.map(|v| m.nodes()[v]);
        assert!(orient(a, b, c) > 0.0);
    }
    let (l, h) = (m.rect().half_width, m.rect().half_height);
    for (tag, expect) in [
        (BoundaryTag::GammaBottom, 2.0 * l),
        (BoundaryTag::GammaTop, 2.0 * l),
        (BoundaryTag::GammaLeft, 2.0 * h),
        (BoundaryTag::GammaRight, 2.0 * h),
    ] {
        assert!((tag_length(m, tag) - expect).abs() < 1e-10, "{tag:?}");
    }
    let body_len = m.body().map_or(0.0, |b| b.perimeter());
    assert!((tag_length(m, BoundaryTag::BodyBoundary) - body_len).abs() < 1e-10);
    let hole = m.body().map_or(0.0, |b| b.area());
    assert!((m.area() - (m.rect().area() - hole)).abs() < 1e-10);
    // the domain lies to the left of every boundary edge
    for (i, e) in m.boundary().iter().enumerate() {
        let t = m.triangles()[m.boundary_triangle(i)];
        let apex = t.iter().find(|v| !e.edge.contains(v)).unwrap();
        let [a, b] = e.edge.map(|v| m.nodes()[v]);
        assert!(orient(a, b, m.nodes()[*apex]) > 0.0);
    }
    assert!(mesh_quality(m).min_angle_deg >= 20.0, "{:?}", mesh_quality(m));
}

#[test]
fn empty_channel_satisfies_euler_relation() {
    for h in [0.5, 0.25, 0.1] {
        let m = generate_mesh(&rect(), None, &MeshOptions::uniform(h)).unwrap();
        check_mesh(&m);
        let (v, e, f) = (m.nodes().len() as i64, m.edge_count() as i64, m.triangles().len() as i64);
        assert_eq!(v - e + f, 1);
        let q = mesh_quality(&m);
        assert!((q.min_angle_deg - 45.0).abs() < 1e-9);
        assert!(q.h_max <= h * 2f64.sqrt() + 1e-12);
    }
}

#[test]
fn body_with_hole_satisfies_euler_relation() {
    let m = generate_mesh(&rect(), Some(&trapezium().body()), &MeshOptions::uniform(0.1)).unwrap();
    let (v, e, f) = (m.nodes().len() as i64, m.edge_count() as i64, m.triangles().len() as i64);
    assert_eq!(v - e + f, 0);
}

#[test]
fn square_body_vertices_are_mesh_nodes() {
    let body = BodyShape::rectangle(-0.25, 0.25, -0.25, 0.25).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.1)).unwrap();
    check_mesh(&m);
    let on_body = m.nodes_with_tag(BoundaryTag::BodyBoundary);
    for v in body.vertices() {
        assert!(on_body.iter().any(|&i| m.nodes()[i] == *v), "{v:?}");
    }
}

#[test]
fn family_meshes_are_valid_across_eps() {
    let p = trapezium();
    for k in 0..=10 {
        let eps = k as f64 / 10.0;
        let body = body_family(eps, &p).unwrap();
        let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(1.0 / 6.0)).unwrap();
        check_mesh(&m);
    }
}

#[test]
fn body_edge_count_scales_with_h() {
    let body = trapezium().body();
    let mut prev = None;
    for h in [0.2, 0.1, 0.05] {
        let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(h)).unwrap();
        let n = mesh_quality(&m).body_edges as f64;
        if let Some(p) = prev {
            let ratio = n / p;
            assert!((1.5..=3.0).contains(&ratio), "ratio {ratio} at h = {h}");
        }
        prev = Some(n);
    }
}

#[test]
fn graded_mesh_is_finer_at_the_body() {
    let body = trapezium().body();
    let opts = MeshOptions { body_h: Some(0.02), ..MeshOptions::uniform(0.2) };
    let m = generate_mesh(&rect(), Some(&body), &opts).unwrap();
    check_mesh(&m);
    let body_edges: Vec<f64> =
        m.boundary().iter().filter(|e| e.tag == BoundaryTag::BodyBoundary).map(|e| len(&m, e)).collect();
    let wall_edges: Vec<f64> =
        m.boundary().iter().filter(|e| e.tag == BoundaryTag::GammaTop).map(|e| len(&m, e)).collect();
    let max_body = body_edges.iter().cloned().fold(0.0, f64::max);
    let min_wall = wall_edges.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max_body < 0.03, "{max_body}");
    assert!(min_wall > 0.05, "{min_wall}");
}

#[test]
fn corner_grading_refines_at_body_vertices() {
    let body = trapezium().body();
    let opts = MeshOptions { body_h: Some(0.1), corner_h: Some(0.01), grading: 0.3, ..MeshOptions::uniform(0.25) };
    let m = generate_mesh(&rect(), Some(&body), &opts).unwrap();
    check_mesh(&m);
    let near = |p: Point, r: f64| body.vertices().iter().any(|v| ((p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2)).sqrt() < r);
    for e in m.boundary().iter().filter(|e| e.tag == BoundaryTag::BodyBoundary) {
        let (a, b) = (m.nodes()[e.edge[0]], m.nodes()[e.edge[1]]);
        let l = len(&m, e);
        if near(a, 1e-12) || near(b, 1e-12) {
            assert!(l < 0.015, "corner edge {l}");
        }
        assert!(l < 0.11, "body edge {l}");
    }
    for bad in [0.0, -1.0, f64::NAN] {
        let opts = MeshOptions { corner_h: Some(bad), ..MeshOptions::uniform(0.25) };
        assert!(matches!(generate_mesh(&rect(), Some(&body), &opts), Err(MeshError::InvalidSize(_))));
    }
}

#[test]
fn generation_is_deterministic() {
    let body = body_family(0.3, &trapezium()).unwrap();
    let a = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.125)).unwrap();
    let b = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.125)).unwrap();
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_eq!(a, b);
}

#[test]
fn reflection_is_an_involution_and_swaps_walls() {
    let body = body_family(0.2, &trapezium()).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.125)).unwrap();
    let r = reflect_mesh(&m);
    check_mesh(&r);
    assert_eq!(reflect_mesh(&r), m);
    for t in 0..m.triangles().len() {
        assert_eq!(m.triangle_area(t), r.triangle_area(t));
    }
    assert_eq!(tag_length(&m, BoundaryTag::GammaTop), tag_length(&r, BoundaryTag::GammaBottom));
    let top: Vec<usize> = m.nodes_with_tag(BoundaryTag::GammaTop);
    assert_eq!(top, r.nodes_with_tag(BoundaryTag::GammaBottom));
}

fn sorted_nodes(nodes: &[Point]) -> Vec<Point> {
    let mut v = nodes.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[test]
fn mirrored_mesh_has_symmetric_node_set() {
    let body = BodyShape::rectangle(-0.6, 0.6, -0.15, 0.15).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(1.0 / 6.0).mirrored()).unwrap();
    check_mesh(&m);
    assert!(m.is_mirror_symmetric());
    let r = reflect_mesh(&m);
    assert_eq!(sorted_nodes(m.nodes()), sorted_nodes(r.nodes()));

    let e = generate_mesh(&rect(), None, &MeshOptions::uniform(0.25)).unwrap();
    let r = reflect_mesh(&e);
    assert_eq!(sorted_nodes(e.nodes()), sorted_nodes(r.nodes()));
}

#[test]
fn mirroring_an_asymmetric_body_is_rejected() {
    let body = body_family(0.3, &trapezium()).unwrap();
    let err = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.125).mirrored()).unwrap_err();
    assert_eq!(err, MeshError::BodyNotSymmetric);
}

#[test]
fn size_and_clearance_errors() {
    let r = rect();
    let body = trapezium().body();
    assert!(matches!(generate_mesh(&r, Some(&body), &MeshOptions::uniform(0.0)), Err(MeshError::InvalidSize(_))));
    assert!(matches!(generate_mesh(&r, Some(&body), &MeshOptions::uniform(f64::NAN)), Err(MeshError::InvalidSize(_))));
    let touching = BodyShape::rectangle(-0.5, 0.5, -0.5, 1.0).unwrap();
    assert_eq!(generate_mesh(&r, Some(&touching), &MeshOptions::uniform(0.1)).unwrap_err(), MeshError::BodyTouchesBoundary);
    let near = BodyShape::rectangle(-0.5, 0.5, -0.5, 0.85).unwrap();
    assert!(matches!(
        generate_mesh(&r, Some(&near), &MeshOptions::uniform(0.1)),
        Err(MeshError::InsufficientClearance { .. })
    ));
    let tiny = BodyShape::rectangle(-0.05, 0.05, -0.05, 0.05).unwrap();
    assert!(matches!(generate_mesh(&r, Some(&tiny), &MeshOptions::uniform(0.1)), Err(MeshError::TooCoarse { .. })));
    let opts = MeshOptions { body_h: Some(0.01), ..MeshOptions::uniform(0.1) };
    check_mesh(&generate_mesh(&r, Some(&tiny), &opts).unwrap());
    let opts = MeshOptions { max_nodes: 100, ..MeshOptions::uniform(0.05) };
    assert!(generate_mesh(&r, Some(&body), &opts).is_err());
}

#[test]
fn json_roundtrip_and_import_validation() {
    let body = body_family(0.7, &trapezium()).unwrap();
    let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.2)).unwrap();
    let back = Mesh::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.fingerprint(), m.fingerprint());

    let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    // reverse one triangle
    let t = v["triangles"][0].as_array_mut().unwrap();
    t.swap(1, 2);
    assert!(matches!(Mesh::from_json(&v.to_string()), Err(MeshError::Invalid(_))));

    let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    v["boundary"].as_array_mut().unwrap().pop();
    assert!(matches!(Mesh::from_json(&v.to_string()), Err(MeshError::Invalid(_))));

    let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    let tag = v["boundary"][0]["tag"].as_str().unwrap().to_string();
    let other = if tag == "GammaTop" { "GammaBottom" } else { "GammaTop" };
    v["boundary"][0]["tag"] = serde_json::Value::from(other);
    assert!(matches!(Mesh::from_json(&v.to_string()), Err(MeshError::Invalid(_))));

    assert!(matches!(Mesh::from_json("{"), Err(MeshError::Json(_))));
}

#[test]
fn quality_of_reference_elements() {
    let s3 = 3f64.sqrt();
    let q = element_quality(&[[0.0, 0.0], [1.0, 0.0], [0.5, s3 / 2.0]], &[[0, 1, 2]]);
    assert!((q.min_angle_deg - 60.0).abs() < 1e-12);
    assert!((q.max_angle_deg - 60.0).abs() < 1e-12);
    assert!((q.max_aspect_ratio - 1.0).abs() < 1e-12);
    let q = element_quality(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]);
    assert!((q.min_angle_deg - 45.0).abs() < 1e-12);
    assert!((q.max_angle_deg - 90.0).abs() < 1e-12);
}

#[test]
fn morph_follows_the_family() {
    let p = trapezium();
    let from = body_family_raw(0.5, &p).unwrap();
    let base = generate_mesh(&rect(), Some(&body_family(0.5, &p).unwrap()), &MeshOptions::uniform(0.1)).unwrap();
    for eps in [0.3, 0.45, 0.6, 0.8] {
        let to = body_family_raw(eps, &p).unwrap();
        let m = morph_body(&base, &from, &to).unwrap();
        assert_eq!(m.triangles(), base.triangles());
        let target = body_family(eps, &p).unwrap();
        for v in m.nodes_with_tag(BoundaryTag::BodyBoundary) {
            assert!(target.distance_to_boundary(m.nodes()[v]) < 1e-12);
        }
        for (v, (a, b)) in m.nodes().iter().zip(base.nodes()).enumerate() {
            if m.rect().inner_distance(*a) == 0.0 {
                assert_eq!(a, b, "outer node {v} moved");
            }
        }
        for t in m.triangles() {
            let [a, b, c] = t.map(|v| m.nodes()[v]);
            assert!(orient(a, b, c) > 0.0);
        }
        assert!((m.area() - (m.rect().area() - target.area())).abs() < 1e-10);
    }
}

#[test]
fn morph_collapses_a_vanishing_side() {
    let p = trapezium();
    let from = body_family_raw(0.5, &p).unwrap();
    let base = generate_mesh(&rect(), Some(&body_family(0.5, &p).unwrap()), &MeshOptions::uniform(0.1)).unwrap();
    let m = morph_body(&base, &from, &body_family_raw(0.0, &p).unwrap()).unwrap();
    assert!(mesh_quality(&m).min_angle_deg > 10.0);
    assert!(m.nodes().len() < base.nodes().len());
    assert!(m.triangles().len() < base.triangles().len());
    assert!((m.area() - (m.rect().area() - p.area())).abs() < 1e-10);
    // just before the collapse the mesh is still valid with the full topology
    let near = morph_body(&base, &from, &body_family_raw(1e-3, &p).unwrap()).unwrap();
    assert_eq!(near.triangles(), base.triangles());
}

#[test]
fn morph_rejects_mismatched_loops() {
    let p = trapezium();
    let from = body_family_raw(0.5, &p).unwrap();
    let base = generate_mesh(&rect(), Some(&body_family(0.5, &p).unwrap()), &MeshOptions::uniform(0.1)).unwrap();
    assert!(morph_body(&base, &from, &from[..4]).is_err());
    let shifted: Vec<Point> = from.iter().map(|q| [q[0] + 1.0, q[1]]).collect();
    assert!(morph_body(&base, &shifted, &from).is_err());
    // collapsing the body far beyond the local element size inverts elements
    let squashed: Vec<Point> = from.iter().map(|q| [q[0] * 6.0, q[1]]).collect();
    assert!(morph_body(&base, &from, &squashed).is_err());
}

fn convex_body() -> impl Strategy<Value = BodyShape> {
    (prop::collection::vec(0.0..std::f64::consts::TAU, 3..9), 0.15..0.45f64, -1.0..1.0f64, -0.2..0.2f64).prop_filter_map(
        "degenerate",
        |(mut angles, r, cx, cy)| {
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let pts: Vec<Point> = angles.iter().map(|t| [cx + r * t.cos(), cy + r * t.sin()]).collect();
            let b = BodyShape::new(pts).ok()?;
            (b.area() > 0.02 && b.edges().all(|(a, c)| ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt() > 0.02))
                .then_some(b)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_convex_bodies_mesh_cleanly(body in convex_body()) {
        let m = generate_mesh(&rect(), Some(&body), &MeshOptions::uniform(0.1)).unwrap();
        check_mesh(&m);
        let on_body = m.nodes_with_tag(BoundaryTag::BodyBoundary);
        for v in body.vertices() {
            prop_assert!(on_body.iter().any(|&i| m.nodes()[i] == *v));
        }
    }
}

#[test]
fn mirrored_meshing_accepts_bodies_symmetric_up_to_rounding() {
    let r = Rect::new(5.0, 1.0).unwrap();
    let pts: Vec<[f64; 2]> = (0..6)
        .map(|k| {
            let p = std::f64::consts::PI * k as f64 / 3.0;
            [0.37 * p.cos(), 0.37 * p.sin()]
        })
        .collect();
    let b = BodyShape::new(pts).unwrap();
    assert!(b.vertices().iter().any(|v| v[1] != 0.0 && v[1].abs() < 1e-15));
    let m = generate_mesh(&r, Some(&b), &MeshOptions::uniform(0.2).mirrored()).unwrap();
    assert!(m.is_mirror_symmetric());
    check_mesh(&m);
}
