//! Triangulations of the fluid domain `R \ B` with tagged boundary edges.
//!
//! Without a body the mesh is a structured grid whose diagonals are mirrored
//! across `x2 = 0`. With a body it comes from the in-crate constrained
//! Delaunay refiner in [`delaunay`]; the `mirror` option meshes the upper half
//! and reflects it, which makes the node set exactly symmetric.

mod delaunay;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_hull, dist, hausdorff_distance, orient, reflect_body, BodyShape, Point, Rect};
use delaunay::{Pslg, RefineOptions, SegTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("target size must be positive and finite (got {0})")]
    InvalidSize(f64),
    #[error("body touches or crosses the channel boundary")]
    BodyTouchesBoundary,
    #[error("body clearance {clearance} must exceed 2h = {}", 2.0 * .h)]
    InsufficientClearance { clearance: f64, h: f64 },
    #[error("h = {h} is too coarse to resolve a body of diameter {diameter}")]
    TooCoarse { h: f64, diameter: f64 },
    #[error("mirror meshing needs a body symmetric about x2 = 0")]
    BodyNotSymmetric,
    #[error("mesh exceeds {0} nodes")]
    TooLarge(usize),
    #[error("mesh generation failed: {0}")]
    Generation(String),
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("mesh morph produced inverted or degenerate elements")]
    MorphInvalid,
    #[error("mesh morph: {0}")]
    Morph(String),
    #[error("mesh JSON: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    GammaBottom,
    GammaTop,
    GammaLeft,
    GammaRight,
    BodyBoundary,
}

impl BoundaryTag {
    /// Tag of the mirror image under `x2 -> -x2`.
    pub fn reflected(self) -> Self {
        match self {
            BoundaryTag::GammaBottom => BoundaryTag::GammaTop,
            BoundaryTag::GammaTop => BoundaryTag::GammaBottom,
            t => t,
        }
    }
}

/// Boundary edge `[a, b]`, oriented with the domain on its left, so the
/// outward normal of the fluid domain is the right-hand normal of `b - a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub edge: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Target element size away from the body.
    pub h: f64,
    /// Optional finer size at the body, graded linearly into `h`.
    #[serde(default)]
    pub body_h: Option<f64>,
    /// Optional finer size at the body vertices, graded linearly outwards.
    #[serde(default)]
    pub corner_h: Option<f64>,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_min_angle")]
    pub min_angle_deg: f64,
    /// Mesh the upper half and reflect (requires a symmetric body).
    #[serde(default)]
    pub mirror: bool,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn default_grading() -> f64 {
    0.5
}
fn default_min_angle() -> f64 {
    25.0
}
fn default_max_nodes() -> usize {
    400_000
}

impl MeshOptions {
    pub fn uniform(h: f64) -> Self {
        MeshOptions {
            h,
            body_h: None,
            corner_h: None,
            grading: default_grading(),
            min_angle_deg: default_min_angle(),
            mirror: false,
            max_nodes: default_max_nodes(),
        }
    }

    pub fn mirrored(mut self) -> Self {
        self.mirror = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    rect: Rect,
    body: Option<BodyShape>,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    h: f64,
    mirror_symmetric: bool,
    boundary_triangle: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    rect: Rect,
    #[serde(default)]
    body: Option<BodyShape>,
    h: f64,
    #[serde(default)]
    mirror_symmetric: bool,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
}

impl Mesh {
    /// Assemble a mesh from raw parts, checking every invariant.
    pub fn from_parts(
        rect: Rect,
        body: Option<BodyShape>,
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        h: f64,
    ) -> Result<Mesh, MeshError> {
        let mut m = Mesh { rect, body, nodes, triangles, boundary, h, mirror_symmetric: false, boundary_triangle: vec![] };
        m.boundary_triangle = m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<Vec<usize>, MeshError> {
        let bad = |s: String| Err(MeshError::Invalid(s));
        let nn = self.nodes.len();
        if self.nodes.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite node".into());
        }
        let mut edge_owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nn) {
                return bad(format!("triangle {t} references a missing node"));
            }
            let [a, b, c] = tri.map(|v| self.nodes[v]);
            if !(orient(a, b, c) > 0.0) {
                return bad(format!("triangle {t} is not positively oriented"));
            }
            for i in 0..3 {
                let (u, w) = (tri[i], tri[(i + 1) % 3]);
                edge_owner.entry((u, w)).or_default().push(t);
            }
        }
        for (&(u, w), owners) in &edge_owner {
            if owners.len() > 1 {
                return bad(format!("directed edge ({u}, {w}) used twice"));
            }
        }
        let mut tri_of = Vec::with_capacity(self.boundary.len());
        let mut tagged = std::collections::HashSet::new();
        for be in &self.boundary {
            let [a, b] = be.edge;
            if a >= nn || b >= nn {
                return bad("boundary edge references a missing node".into());
            }
            let Some(owner) = edge_owner.get(&(a, b)) else {
                return bad(format!("boundary edge ({a}, {b}) is not an edge with the domain on its left"));
            };
            if edge_owner.contains_key(&(b, a)) {
                return bad(format!("boundary edge ({a}, {b}) is interior"));
            }
            if !tagged.insert((a, b)) {
                return bad(format!("boundary edge ({a}, {b}) tagged twice"));
            }
            tri_of.push(owner[0]);
            self.check_tag_geometry(be)?;
        }
        for &(u, w) in edge_owner.keys() {
            if !edge_owner.contains_key(&(w, u)) && !tagged.contains(&(u, w)) {
                return bad(format!("untagged boundary edge ({u}, {w})"));
            }
        }
        let total: f64 = self.boundary.iter().map(|e| dist(self.nodes[e.edge[0]], self.nodes[e.edge[1]])).sum();
        let expect = self.rect.perimeter() + self.body.as_ref().map_or(0.0, |b| b.perimeter());
        if (total - expect).abs() > 1e-10 * expect {
            return bad(format!("tagged boundary length {total} differs from |dR| + |dB| = {expect}"));
        }
        if let Some(body) = &self.body {
            let tol = 1e-9 * body.diameter();
            for (i, &p) in self.nodes.iter().enumerate() {
                if body.distance_to(p) == 0.0 && body.distance_to_boundary(p) > tol {
                    return bad(format!("node {i} lies inside the body"));
                }
            }
        }
        Ok(tri_of)
    }

    fn check_tag_geometry(&self, be: &BoundaryEdge) -> Result<(), MeshError> {
        let (l, h) = (self.rect.half_width, self.rect.half_height);
        let tol = 1e-10 * l;
        let on = |p: Point| -> bool {
            match be.tag {
                BoundaryTag::GammaBottom => (p[1] + h).abs() <= tol,
                BoundaryTag::GammaTop => (p[1] - h).abs() <= tol,
                BoundaryTag::GammaLeft => (p[0] + l).abs() <= tol,
                BoundaryTag::GammaRight => (p[0] - l).abs() <= tol,
                BoundaryTag::BodyBoundary => {
                    self.body.as_ref().is_some_and(|b| b.distance_to_boundary(p) <= 1e-9 * b.diameter())
                }
            }
        };
        let [a, b] = be.edge.map(|v| self.nodes[v]);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if on(a) && on(b) && on(mid) {
            Ok(())
        } else {
            Err(MeshError::Invalid(format!("edge {:?} does not lie on {:?}", be.edge, be.tag)))
        }
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn body(&self) -> Option<&BodyShape> {
        self.body.as_ref()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Index of the triangle owning boundary edge `i`.
    pub fn boundary_triangle(&self, i: usize) -> usize {
        self.boundary_triangle[i]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.mirror_symmetric
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.nodes[v]);
        0.5 * orient(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        let mut set = std::collections::HashSet::new();
        for tri in &self.triangles {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.len()
    }

    /// Nodes on edges tagged `tag`, sorted and deduplicated.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary.iter().filter(|e| e.tag == tag).flat_map(|e| e.edge).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_f64s(
            self.nodes
                .iter()
                .flatten()
                .copied()
                .chain(self.triangles.iter().flatten().map(|&v| v as f64)),
        )
    }

    pub fn to_json(&self) -> String {
        let f = MeshFile {
            rect: self.rect,
            body: self.body.clone(),
            h: self.h,
            mirror_symmetric: self.mirror_symmetric,
            nodes: self.nodes.clone(),
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
        };
        serde_json::to_string(&f).expect("mesh serializes")
    }

    /// Parse and validate a mesh export.
    pub fn from_json(s: &str) -> Result<Mesh, MeshError> {
        let f: MeshFile = serde_json::from_str(s).map_err(|e| MeshError::Json(e.to_string()))?;
        f.rect.check().map_err(|e| MeshError::Invalid(e.to_string()))?;
        let mut m = Mesh::from_parts(f.rect, f.body, f.nodes, f.triangles, f.boundary, f.h)?;
        m.mirror_symmetric = f.mirror_symmetric;
        Ok(m)
    }
}

/// Build a mesh of `R \ B` with target size `opts.h`.
pub fn generate_mesh(rect: &Rect, body: Option<&BodyShape>, opts: &MeshOptions) -> Result<Mesh, MeshError> {
    let h = opts.h;
    if !(h > 0.0 && h.is_finite()) {
        return Err(MeshError::InvalidSize(h));
    }
    for s in [opts.body_h, opts.corner_h].into_iter().flatten() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(MeshError::InvalidSize(s));
        }
    }
    rect.check().map_err(|e| MeshError::Invalid(e.to_string()))?;
    let Some(body) = body else {
        return structured_mesh(rect, h);
    };
    let clearance = body.vertices().iter().map(|&v| rect.inner_distance(v)).fold(f64::INFINITY, f64::min);
    if !(clearance > 0.0) {
        return Err(MeshError::BodyTouchesBoundary);
    }
    if clearance <= 2.0 * h {
        return Err(MeshError::InsufficientClearance { clearance, h });
    }
    let diameter = body.diameter();
    if h > diameter / 3.0 && opts.body_h.map_or(true, |bh| bh > diameter / 3.0) {
        return Err(MeshError::TooCoarse { h, diameter });
    }
    let body_h = opts.body_h.unwrap_or(h).min(h);
    let grading = opts.grading.max(1e-3);
    let corner_h = opts.corner_h.unwrap_or(body_h).min(body_h);
    let size = move |p: Point| -> f64 {
        let mut s = h;
        if body_h < h {
            s = s.min(body_h + grading * body.distance_to(p));
        }
        if corner_h < body_h {
            let d = body.vertices().iter().map(|&v| dist(v, p)).fold(f64::INFINITY, f64::min);
            s = s.min(corner_h + grading * d);
        }
        s
    };
    let refine = RefineOptions { min_angle_deg: opts.min_angle_deg, size: &size, max_points: opts.max_nodes };
    let mesh = if opts.mirror {
        if hausdorff_distance(body, &reflect_body(body)) > 1e-12 * diameter {
            return Err(MeshError::BodyNotSymmetric);
        }
        let body = &symmetrized(body);
        let pslg = half_domain_pslg(rect, body, &size)?;
        let raw = delaunay::triangulate(&pslg, &refine)?;
        let (nodes, triangles, boundary) = fix_corners(raw.nodes, raw.triangles, raw.segments);
        let (nodes, triangles, boundary) = mirror_merge(nodes, triangles, boundary);
        let mut m = Mesh::from_parts(*rect, Some(body.clone()), nodes, triangles, boundary, h)?;
        m.mirror_symmetric = true;
        m
    } else {
        let pslg = full_domain_pslg(rect, body, &size);
        let raw = delaunay::triangulate(&pslg, &refine)?;
        let (nodes, triangles, segs) = fix_corners(raw.nodes, raw.triangles, raw.segments);
        let boundary = segs
            .into_iter()
            .map(|(edge, tag)| BoundaryEdge { edge, tag: tag.expect("full domain has no axis segments") })
            .collect();
        Mesh::from_parts(*rect, Some(body.clone()), nodes, triangles, boundary, h)?
    };
    Ok(mesh)
}

fn even_count(len: f64, h: f64) -> usize {
    let n = (len / h - 1e-9).ceil().max(2.0) as usize;
    n + n % 2
}

/// Structured grid of the empty channel with diagonals mirrored across both
/// axes; no triangle has two boundary edges.
fn structured_mesh(rect: &Rect, h: f64) -> Result<Mesh, MeshError> {
    let (l, hh) = (rect.half_width, rect.half_height);
    let nx = even_count(2.0 * l, h);
    let ny = even_count(2.0 * hh, h);
    let x = |i: usize| l * (2.0 * i as f64 - nx as f64) / nx as f64;
    let y = |j: usize| hh * (2.0 * j as f64 - ny as f64) / ny as f64;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([x(i), y(j)]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let right = 2 * i + 1 > nx;
            let upper = 2 * j + 1 > ny;
            if right == upper {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundaryEdge { edge: [id(i, 0), id(i + 1, 0)], tag: BoundaryTag::GammaBottom });
        boundary.push(BoundaryEdge { edge: [id(i + 1, ny), id(i, ny)], tag: BoundaryTag::GammaTop });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge { edge: [id(nx, j), id(nx, j + 1)], tag: BoundaryTag::GammaRight });
        boundary.push(BoundaryEdge { edge: [id(0, j + 1), id(0, j)], tag: BoundaryTag::GammaLeft });
    }
    let mut m = Mesh::from_parts(*rect, None, nodes, triangles, boundary, h)?;
    m.mirror_symmetric = true;
    Ok(m)
}

/// Append the chain `a -> b` split into `k` equal pieces (excluding `b`).
fn push_chain(points: &mut Vec<Point>, a: Point, b: Point, k: usize) {
    for j in 0..k {
        let t = j as f64 / k as f64;
        points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
}

fn pieces(a: Point, b: Point, size: &dyn Fn(Point) -> f64, min: usize) -> usize {
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let s = size(a).min(size(b)).min(size(mid));
    ((dist(a, b) / s - 1e-9).ceil() as usize).max(min)
}

/// Closed loop of polygon sides (each with a tag), pre-split to the sizing
/// function, appended to `pslg`.
fn add_loop(pslg: &mut Pslg, corners: &[(Point, SegTag, usize)], size: &dyn Fn(Point) -> f64) {
    let start = pslg.points.len();
    let n = corners.len();
    let mut tags = Vec::new();
    for i in 0..n {
        let (a, tag, min) = corners[i];
        let b = corners[(i + 1) % n].0;
        let k = pieces(a, b, size, min);
        push_chain(&mut pslg.points, a, b, k);
        tags.extend(std::iter::repeat(tag).take(k));
    }
    let m = pslg.points.len() - start;
    for (j, tag) in tags.into_iter().enumerate() {
        pslg.segments.push(([start + j, start + (j + 1) % m], tag));
    }
}

const MIN_BODY_PIECES: usize = 3;

fn full_domain_pslg(rect: &Rect, body: &BodyShape, size: &dyn Fn(Point) -> f64) -> Pslg {
    let mut pslg = Pslg { points: vec![], segments: vec![] };
    let [c0, c1, c2, c3] = rect.corners();
    add_loop(
        &mut pslg,
        &[
            (c0, Some(BoundaryTag::GammaBottom), 1),
            (c1, Some(BoundaryTag::GammaRight), 1),
            (c2, Some(BoundaryTag::GammaTop), 1),
            (c3, Some(BoundaryTag::GammaLeft), 1),
        ],
        size,
    );
    // the hole is traversed clockwise so the fluid stays on the left
    let mut hole: Vec<(Point, SegTag, usize)> =
        body.vertices().iter().map(|&v| (v, Some(BoundaryTag::BodyBoundary), MIN_BODY_PIECES)).collect();
    hole.reverse();
    add_loop(&mut pslg, &hole, size);
    pslg
}

/// Upper half `{x2 >= 0}` of `R \ B` as a single simple polygon.
fn half_domain_pslg(rect: &Rect, body: &BodyShape, size: &dyn Fn(Point) -> f64) -> Result<Pslg, MeshError> {
    let (l, h) = (rect.half_width, rect.half_height);
    let upper = clip_upper(body);
    if upper.len() < 2 {
        return Err(MeshError::BodyNotSymmetric);
    }
    // upper chain runs CCW from (xr, 0) to (xl, 0)
    let xr = upper[0];
    let xl = *upper.last().expect("non-empty");
    let mut corners: Vec<(Point, SegTag, usize)> = vec![([-l, 0.0], None, 1)];
    corners.push((xl, Some(BoundaryTag::BodyBoundary), MIN_BODY_PIECES));
    for &p in upper.iter().rev().skip(1) {
        let tag = if p == xr { None } else { Some(BoundaryTag::BodyBoundary) };
        corners.push((p, tag, MIN_BODY_PIECES));
    }
    corners.push(([l, 0.0], Some(BoundaryTag::GammaRight), 1));
    corners.push(([l, h], Some(BoundaryTag::GammaTop), 1));
    corners.push(([-l, h], Some(BoundaryTag::GammaLeft), 1));
    // the segment from xr to (l, 0) lies on the axis
    let mut pslg = Pslg { points: vec![], segments: vec![] };
    add_loop(&mut pslg, &corners, size);
    Ok(pslg)
}

/// Exactly symmetric copy of a body that is symmetric up to rounding: the
/// upper vertices and their mirror images, with near-axis vertices snapped.
fn symmetrized(body: &BodyShape) -> BodyShape {
    let tol = 1e-12 * body.diameter();
    let mut pts = Vec::new();
    for &[x, y] in body.vertices() {
        if y.abs() <= tol {
            pts.push([x, 0.0]);
        } else if y > 0.0 {
            pts.push([x, y]);
            pts.push([x, -y]);
        }
    }
    if !body.is_convex() {
        return body.clone();
    }
    convex_hull(&pts).unwrap_or_else(|_| body.clone())
}

/// Boundary of `B ∩ {x2 >= 0}` as a CCW chain from its right axis point to its
/// left axis point.
fn clip_upper(body: &BodyShape) -> Vec<Point> {
    let v = body.vertices();
    let n = v.len();
    // start at the vertex after the crossing from below to above
    let mut loop_pts: Vec<Point> = Vec::new();
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        if a[1] >= 0.0 {
            loop_pts.push(a);
        }
        if (a[1] < 0.0 && b[1] > 0.0) || (a[1] > 0.0 && b[1] < 0.0) {
            let t = a[1] / (a[1] - b[1]);
            loop_pts.push([a[0] + t * (b[0] - a[0]), 0.0]);
        }
    }
    // rotate so the chain starts at the right-most axis point and ends at the left-most
    let on_axis: Vec<usize> = (0..loop_pts.len()).filter(|&i| loop_pts[i][1] == 0.0).collect();
    if on_axis.len() < 2 {
        return vec![];
    }
    let right = *on_axis
        .iter()
        .max_by(|&&i, &&j| loop_pts[i][0].partial_cmp(&loop_pts[j][0]).expect("finite"))
        .expect("two axis points");
    loop_pts.rotate_left(right);
    let left = (0..loop_pts.len())
        .filter(|&i| loop_pts[i][1] == 0.0)
        .min_by(|&i, &j| loop_pts[i][0].partial_cmp(&loop_pts[j][0]).expect("finite"))
        .expect("two axis points");
    loop_pts.truncate(left + 1);
    loop_pts
}

type Parts = (Vec<Point>, Vec<[usize; 3]>, Vec<([usize; 2], SegTag)>);

/// Flip the interior edge of any triangle with two boundary edges, which would
/// otherwise carry an unconstrained corner pressure.
fn fix_corners(nodes: Vec<Point>, mut tris: Vec<[usize; 3]>, segs: Vec<([usize; 2], SegTag)>) -> Parts {
    // axis segments of a half-domain become interior after mirroring
    let is_boundary: std::collections::HashSet<(usize, usize)> =
        segs.iter().filter(|(_, tag)| tag.is_some()).map(|(e, _)| (e[0], e[1])).collect();
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for i in 0..3 {
            owner.insert((tri[i], tri[(i + 1) % 3]), t);
        }
    }
    for t in 0..tris.len() {
        let tri = tris[t];
        let bnd: Vec<usize> = (0..3).filter(|&i| is_boundary.contains(&(tri[i], tri[(i + 1) % 3]))).collect();
        if bnd.len() != 2 {
            continue;
        }
        // interior edge (a, b) with corner c opposite
        let i = (0..3).find(|i| !bnd.contains(i)).expect("one interior edge");
        let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let Some(&u) = owner.get(&(b, a)) else { continue };
        let d = *tris[u].iter().find(|&&v| v != a && v != b).expect("triangle apex");
        // new triangles (c, a, d) and (c, d, b) must both be positive
        let (pa, pb, pc, pd) = (nodes[a], nodes[b], nodes[c], nodes[d]);
        if orient(pc, pa, pd) <= 0.0 || orient(pc, pd, pb) <= 0.0 {
            continue;
        }
        tris[t] = [c, a, d];
        tris[u] = [c, d, b];
        for (k, tr) in [(t, tris[t]), (u, tris[u])] {
            for j in 0..3 {
                owner.insert((tr[j], tr[(j + 1) % 3]), k);
            }
        }
        owner.remove(&(a, b));
        owner.remove(&(b, a));
    }
    (nodes, tris, segs)
}

/// Reflect the upper half-mesh across `x2 = 0` and glue along the axis.
fn mirror_merge(nodes: Vec<Point>, tris: Vec<[usize; 3]>, segs: Vec<([usize; 2], SegTag)>) -> (Vec<Point>, Vec<[usize; 3]>, Vec<BoundaryEdge>) {
    let n = nodes.len();
    let mut all = nodes.clone();
    let mut image = vec![0usize; n];
    for (i, p) in nodes.iter().enumerate() {
        if p[1] == 0.0 {
            image[i] = i;
        } else {
            image[i] = all.len();
            all.push([p[0], -p[1]]);
        }
    }
    let mut triangles = tris.clone();
    triangles.extend(tris.iter().map(|t| [image[t[0]], image[t[2]], image[t[1]]]));
    let mut boundary = Vec::new();
    for (e, tag) in &segs {
        if let Some(tag) = tag {
            boundary.push(BoundaryEdge { edge: *e, tag: *tag });
        }
    }
    for (e, tag) in &segs {
        if let Some(tag) = tag {
            boundary.push(BoundaryEdge { edge: [image[e[1]], image[e[0]]], tag: tag.reflected() });
        }
    }
    (all, triangles, boundary)
}

/// Mirror image of a mesh under `x2 -> -x2`.
pub fn reflect_mesh(m: &Mesh) -> Mesh {
    Mesh {
        rect: m.rect,
        body: m.body.as_ref().map(reflect_body),
        nodes: m.nodes.iter().map(|p| [p[0], -p[1]]).collect(),
        triangles: m.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
        boundary: m
            .boundary
            .iter()
            .map(|e| BoundaryEdge { edge: [e.edge[1], e.edge[0]], tag: e.tag.reflected() })
            .collect(),
        h: m.h,
        mirror_symmetric: m.mirror_symmetric,
        boundary_triangle: m.boundary_triangle.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    /// Circumradius over twice the inradius (1 for equilateral).
    pub max_aspect_ratio: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub nodes: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub body_edges: usize,
}

fn angles(a: Point, b: Point, c: Point) -> [f64; 3] {
    let ang = |p: Point, q: Point, r: Point| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1]).to_degrees()
    };
    [ang(a, b, c), ang(b, c, a), ang(c, a, b)]
}

pub fn mesh_quality(m: &Mesh) -> MeshQuality {
    let mut q = element_quality(&m.nodes, &m.triangles);
    q.edges = m.edge_count();
    q.boundary_edges = m.boundary.len();
    q.body_edges = m.boundary.iter().filter(|e| e.tag == BoundaryTag::BodyBoundary).count();
    q
}

/// Angle, size and aspect statistics of an arbitrary triangle soup (edge and
/// boundary counts are left at zero).
pub fn element_quality(nodes: &[Point], triangles: &[[usize; 3]]) -> MeshQuality {
    let mut q = MeshQuality {
        min_angle_deg: 180.0,
        max_angle_deg: 0.0,
        max_aspect_ratio: 0.0,
        h_min: f64::INFINITY,
        h_max: 0.0,
        nodes: nodes.len(),
        edges: 0,
        triangles: triangles.len(),
        boundary_edges: 0,
        body_edges: 0,
    };
    for t in triangles {
        let [a, b, c] = t.map(|v| nodes[v]);
        for x in angles(a, b, c) {
            q.min_angle_deg = q.min_angle_deg.min(x);
            q.max_angle_deg = q.max_angle_deg.max(x);
        }
        let (la, lb, lc) = (dist(b, c), dist(c, a), dist(a, b));
        q.h_min = q.h_min.min(la.min(lb).min(lc));
        q.h_max = q.h_max.max(la.max(lb).max(lc));
        let area = 0.5 * orient(a, b, c);
        let s = 0.5 * (la + lb + lc);
        let circ = la * lb * lc / (4.0 * area);
        let inr = area / s;
        q.max_aspect_ratio = q.max_aspect_ratio.max(circ / (2.0 * inr));
    }
    q
}

/// Move the body of `m` from the polygon `from` to `to` (vertex loops with the
/// same correspondence, e.g. two members of the trapezium family), extending
/// the boundary displacement harmonically into the fluid. Body sides that
/// shrink to a point are collapsed: their nodes merge and the triangles on
/// them are dropped, which is the limit of the morph as the side vanishes.
pub fn morph_body(m: &Mesh, from: &[Point], to: &[Point]) -> Result<Mesh, MeshError> {
    if from.len() != to.len() || from.len() < 3 {
        return Err(MeshError::Morph("vertex loops differ in length".into()));
    }
    let target = BodyShape::new(to.to_vec()).map_err(|e| MeshError::Morph(e.to_string()))?;
    let body_nodes = m.nodes_with_tag(BoundaryTag::BodyBoundary);
    if body_nodes.is_empty() {
        return Err(MeshError::Morph("mesh has no body".into()));
    }
    let scale = m.body.as_ref().map_or(1.0, |b| b.diameter());
    let nl = from.len();
    let mut disp: HashMap<usize, Point> = HashMap::new();
    for &v in &body_nodes {
        let p = m.nodes[v];
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for k in 0..nl {
            let (a, b) = (from[k], from[(k + 1) % nl]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            if len2 == 0.0 {
                continue;
            }
            let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
            let d = dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]]);
            if d < best.0 {
                best = (d, k, t);
            }
        }
        let (d, k, t) = best;
        if d > 1e-9 * scale {
            return Err(MeshError::Morph(format!("body node {v} is not on the source polygon")));
        }
        let (a, b) = (to[k], to[(k + 1) % nl]);
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        disp.insert(v, [q[0] - p[0], q[1] - p[1]]);
    }
    let mut fixed: Vec<Option<Point>> = vec![None; m.nodes.len()];
    for e in &m.boundary {
        for v in e.edge {
            fixed[v] = Some(disp.get(&v).copied().unwrap_or([0.0, 0.0]));
        }
    }
    let d = harmonic_extension(m, &fixed)?;
    let mut nodes: Vec<Point> = m.nodes.iter().zip(&d).map(|(p, u)| [p[0] + u[0], p[1] + u[1]]).collect();
    // snap body nodes exactly
    for (&v, u) in &disp {
        nodes[v] = [m.nodes[v][0] + u[0], m.nodes[v][1] + u[1]];
    }
    let (nodes, triangles, boundary) = collapse_zero_edges(nodes, &m.triangles, &m.boundary);
    for t in &triangles {
        let [a, b, c] = t.map(|v| nodes[v]);
        if !(orient(a, b, c) > 0.0) {
            return Err(MeshError::MorphInvalid);
        }
    }
    let mut out = Mesh {
        rect: m.rect,
        body: Some(target),
        nodes,
        triangles,
        boundary,
        h: m.h,
        mirror_symmetric: false,
        boundary_triangle: vec![],
    };
    out.boundary_triangle = out.validate()?;
    Ok(out)
}

/// Merge the end points of boundary edges that a morph shrank to a point and
/// drop the triangles that became degenerate. Surviving nodes keep their
/// relative order.
fn collapse_zero_edges(
    nodes: Vec<Point>,
    triangles: &[[usize; 3]],
    boundary: &[BoundaryEdge],
) -> (Vec<Point>, Vec<[usize; 3]>, Vec<BoundaryEdge>) {
    let n = nodes.len();
    let mut rep: Vec<usize> = (0..n).collect();
    fn find(rep: &mut [usize], v: usize) -> usize {
        let mut r = v;
        while rep[r] != r {
            r = rep[r];
        }
        rep[v] = r;
        r
    }
    let mut merged = false;
    for e in boundary {
        let [a, b] = e.edge;
        if nodes[a] == nodes[b] {
            let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
            if ra != rb {
                rep[ra.max(rb)] = ra.min(rb);
                merged = true;
            }
        }
    }
    if !merged {
        return (nodes, triangles.to_vec(), boundary.to_vec());
    }
    let roots: Vec<usize> = (0..n).map(|v| find(&mut rep, v)).collect();
    let mut new_index = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for v in 0..n {
        if roots[v] == v {
            new_index[v] = kept.len();
            kept.push(nodes[v]);
        }
    }
    let map = |v: usize| new_index[roots[v]];
    let tris = triangles
        .iter()
        .map(|t| t.map(map))
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[2] != t[0])
        .collect();
    let edges = boundary
        .iter()
        .map(|e| BoundaryEdge { edge: e.edge.map(map), tag: e.tag })
        .filter(|e| e.edge[0] != e.edge[1])
        .collect();
    (kept, tris, edges)
}

/// Solve the P1 Laplace problem for each displacement component with the
/// given Dirichlet values.
fn harmonic_extension(m: &Mesh, fixed: &[Option<Point>]) -> Result<Vec<Point>, MeshError> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};
    let n = m.nodes.len();
    let mut free_index = vec![usize::MAX; n];
    let mut nf = 0;
    for v in 0..n {
        if fixed[v].is_none() {
            free_index[v] = nf;
            nf += 1;
        }
    }
    let mut out: Vec<Point> = fixed.iter().map(|f| f.unwrap_or([0.0, 0.0])).collect();
    if nf == 0 {
        return Ok(out);
    }
    let mut trip = Vec::new();
    let mut rhs = vec![[0.0; 2]; nf];
    for t in &m.triangles {
        let p = t.map(|v| m.nodes[v]);
        let area = 0.5 * orient(p[0], p[1], p[2]);
        let g: Vec<Point> = (0..3)
            .map(|i| {
                let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
            })
            .collect();
        for i in 0..3 {
            let fi = free_index[t[i]];
            if fi == usize::MAX {
                continue;
            }
            for j in 0..3 {
                let k = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                let fj = free_index[t[j]];
                if fj == usize::MAX {
                    let u = fixed[t[j]].expect("fixed node");
                    rhs[fi][0] -= k * u[0];
                    rhs[fi][1] -= k * u[1];
                } else {
                    trip.push(Triplet::new(fi, fj, k));
                }
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trip).map_err(|e| MeshError::Morph(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| MeshError::Morph(format!("{e:?}")))?;
    for comp in 0..2 {
        let b = faer::Col::<f64>::from_fn(nf, |i| rhs[i][comp]);
        let x = lu.solve(&b);
        for v in 0..n {
            if free_index[v] != usize::MAX {
                out[v][comp] = x[free_index[v]];
            }
        }
    }
    Ok(out)
}
