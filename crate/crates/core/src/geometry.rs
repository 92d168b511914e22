//! Convex body shapes, the admissible body class, Hausdorff distance and the
//! area-preserving trapezium family `B_eps` that deforms a trapezium into its
//! mirror image.
//!
//! Points are plain `[x1, x2]` arrays. Every [`BodyShape`] is stored in a
//! canonical form: counterclockwise, no repeated or collinear vertices, and
//! rotated so that the lexicographically smallest vertex comes first. Two
//! bodies that are equal as point sets therefore compare equal vertex by vertex
//! (up to rounding).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 distinct, non-collinear vertices (got {0})")]
    TooFewVertices(usize),
    #[error("polygon has non-finite coordinates")]
    NonFinite,
    #[error("rectangle must satisfy half_width > half_height > 0 (got L={0}, H={1})")]
    InvalidRect(f64, f64),
    #[error("family parameter eps = {0} outside [0, 1]")]
    EpsOutOfRange(f64),
    #[error("invalid trapezium parameters: {0}")]
    InvalidTrapezium(String),
    #[error("invalid body class: {0}")]
    InvalidBodyClass(String),
}

/// Axis-aligned rectangle `(-L, L) x (-H, H)` centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub half_width: f64,
    pub half_height: f64,
}

impl Rect {
    /// Channel rectangle; requires `L > H > 0`.
    pub fn new(half_width: f64, half_height: f64) -> Result<Self, GeometryError> {
        let r = Rect { half_width, half_height };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        let (l, h) = (self.half_width, self.half_height);
        if !(l.is_finite() && h.is_finite() && l > h && h > 0.0) {
            return Err(GeometryError::InvalidRect(l, h));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_height
    }

    pub fn perimeter(&self) -> f64 {
        4.0 * (self.half_width + self.half_height)
    }

    /// Closed containment with an absolute slack.
    pub fn contains(&self, p: Point, slack: f64) -> bool {
        p[0].abs() <= self.half_width + slack && p[1].abs() <= self.half_height + slack
    }

    /// Distance from `p` (assumed inside) to the rectangle boundary.
    pub fn inner_distance(&self, p: Point) -> f64 {
        (self.half_width - p[0].abs()).min(self.half_height - p[1].abs())
    }

    pub fn corners(&self) -> [Point; 4] {
        let (l, h) = (self.half_width, self.half_height);
        [[-l, -h], [l, -h], [l, h], [-l, h]]
    }
}

/// A polygonal body in canonical counterclockwise form.
///
/// Convexity is *not* enforced here (so that non-convex inputs can be built
/// and then rejected by [`is_admissible_body`]); everything downstream of the
/// admissibility check assumes it.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BodyShape {
    vertices: Vec<Point>,
}

impl<'de> Deserialize<'de> for BodyShape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pts = Vec::<Point>::deserialize(d)?;
        BodyShape::new(pts).map_err(serde::de::Error::custom)
    }
}

impl BodyShape {
    /// Canonicalize an arbitrary vertex loop (either orientation).
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        Ok(BodyShape { vertices: canonicalize(points)? })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, GeometryError> {
        BodyShape::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges `(v_i, v_{i+1})` in counterclockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| dist(a, b)).sum()
    }

    /// Area centroid.
    pub fn barycenter(&self) -> Point {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let c = cross(p, q);
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        bbox(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, &p) in self.vertices.iter().enumerate() {
            for &q in &self.vertices[i + 1..] {
                d = d.max(dist(p, q));
            }
        }
        d
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let tol = collinear_tol(&self.vertices);
        (0..n).all(|i| {
            let a = self.vertices[(i + n - 1) % n];
            let b = self.vertices[i];
            let c = self.vertices[(i + 1) % n];
            orient(a, b, c) > tol
        }) && self.is_simple()
    }

    fn is_simple(&self) -> bool {
        // a locally convex CCW loop is simple iff its turning number is one
        let n = self.vertices.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = self.vertices[(i + n - 1) % n];
            let b = self.vertices[i];
            let c = self.vertices[(i + 1) % n];
            let u = sub(b, a);
            let v = sub(c, b);
            total += cross(u, v).atan2(dot(u, v));
        }
        (total - 2.0 * std::f64::consts::PI).abs() < 1e-6
    }

    /// Point-in-polygon (closed). Works for simple non-convex polygons too.
    pub fn contains(&self, p: Point) -> bool {
        self.distance_to_boundary(p) == 0.0 || winding_inside(&self.vertices, p)
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the filled polygon (zero inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        if winding_inside(&self.vertices, p) {
            0.0
        } else {
            self.distance_to_boundary(p)
        }
    }

    pub fn translate(&self, t: Point) -> BodyShape {
        self.map(|p| [p[0] + t[0], p[1] + t[1]])
    }

    /// Scale about `c` by `(sx, sy)`.
    pub fn scale_about(&self, c: Point, sx: f64, sy: f64) -> BodyShape {
        self.map(|p| [c[0] + sx * (p[0] - c[0]), c[1] + sy * (p[1] - c[1])])
    }

    fn map(&self, f: impl Fn(Point) -> Point) -> BodyShape {
        let pts = self.vertices.iter().map(|&p| f(p)).collect();
        BodyShape::new(pts).expect("affine image of a valid polygon")
    }

    /// Vertex-set fingerprint (hex), stable across runs.
    pub fn fingerprint(&self) -> String {
        crate::fingerprint_f64s(self.vertices.iter().flatten().copied())
    }
}

/// Admissible body class `C_{alpha,D}`: convex bodies of area `alpha` inside
/// the confinement rectangle `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyClass {
    pub d: ConfinementBox,
    pub alpha: f64,
    #[serde(default = "default_area_tol")]
    pub area_tol: f64,
}

fn default_area_tol() -> f64 {
    1e-9
}

/// Centred confinement box `[-a, a] x [-b, b]`. Unlike [`Rect`] the aspect
/// ratio is unconstrained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfinementBox {
    pub half_width: f64,
    pub half_height: f64,
}

impl ConfinementBox {
    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_height
    }

    pub fn contains(&self, p: Point, slack: f64) -> bool {
        p[0].abs() <= self.half_width + slack && p[1].abs() <= self.half_height + slack
    }
}

impl BodyClass {
    /// Validate against the channel `r`: `0 < alpha < |D|` and `D` strictly inside `R`.
    pub fn new(r: &Rect, d: ConfinementBox, alpha: f64) -> Result<Self, GeometryError> {
        let bc = BodyClass { d, alpha, area_tol: default_area_tol() };
        bc.check(r)?;
        Ok(bc)
    }

    pub fn check(&self, r: &Rect) -> Result<(), GeometryError> {
        let d = &self.d;
        if !(d.half_width > 0.0 && d.half_height > 0.0) {
            return Err(GeometryError::InvalidBodyClass("D must have positive extent".into()));
        }
        if !(d.half_width < r.half_width && d.half_height < r.half_height) {
            return Err(GeometryError::InvalidBodyClass(
                "D must lie strictly inside R with positive margin".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < d.area()) {
            return Err(GeometryError::InvalidBodyClass(format!(
                "alpha = {} must satisfy 0 < alpha < |D| = {}",
                self.alpha,
                d.area()
            )));
        }
        if !(self.area_tol >= 0.0) {
            return Err(GeometryError::InvalidBodyClass("area_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyViolation {
    NotConvex,
    OutsideConfinement { vertex: Point },
    AreaMismatch { area: f64, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyReport {
    pub admissible: bool,
    pub violations: Vec<BodyViolation>,
}

/// Exact shoelace area of the vertex loop.
pub fn polygon_area(b: &BodyShape) -> f64 {
    b.area()
}

/// Check membership in `C_{alpha,D}`, listing every failed condition.
pub fn is_admissible_body(b: &BodyShape, c: &BodyClass) -> BodyReport {
    let mut violations = Vec::new();
    if !b.is_convex() {
        violations.push(BodyViolation::NotConvex);
    }
    // vertex-wise containment suffices for a convex body in a box
    let slack = 1e-14 * c.d.half_width.max(c.d.half_height);
    for &v in b.vertices() {
        if !c.d.contains(v, slack) {
            violations.push(BodyViolation::OutsideConfinement { vertex: v });
        }
    }
    let area = b.area();
    if (area - c.alpha).abs() > c.area_tol * c.alpha {
        violations.push(BodyViolation::AreaMismatch { area, alpha: c.alpha });
    }
    BodyReport { admissible: violations.is_empty(), violations }
}

/// Hausdorff distance between two bodies.
///
/// Exact when both are convex: the distance to a convex set is a convex
/// function, so each directed distance is attained at a vertex.
pub fn hausdorff_distance(a: &BodyShape, b: &BodyShape) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// `sup_{p in A} dist(p, B)`.
pub fn directed_hausdorff(a: &BodyShape, b: &BodyShape) -> f64 {
    a.vertices().iter().map(|&p| b.distance_to(p)).fold(0.0, f64::max)
}

/// Mirror image under `x2 -> -x2`.
pub fn reflect_body(b: &BodyShape) -> BodyShape {
    let pts = b.vertices().iter().map(|p| [p[0], -p[1]]).collect();
    BodyShape::new(pts).expect("reflection of a valid polygon")
}

/// Parameters of the trapezium `[-l, l] x [-h, h]` plus the triangle
/// `(l,-h), (l,h), (l+gamma,h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapeziumParams {
    pub l: f64,
    pub h: f64,
    pub gamma: f64,
}

impl TrapeziumParams {
    pub fn new(l: f64, h: f64, gamma: f64) -> Result<Self, GeometryError> {
        let p = TrapeziumParams { l, h, gamma };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        let TrapeziumParams { l, h, gamma } = *self;
        if !(h > 0.0 && h < l && gamma > 0.0 && gamma < l) {
            return Err(GeometryError::InvalidTrapezium(format!(
                "need 0 < h < l and 0 < gamma < l (l={l}, h={h}, gamma={gamma})"
            )));
        }
        Ok(())
    }

    /// Check against the channel and an optional confinement box. Every
    /// member of the family lies in `[-l, l+gamma] x [-h, h]`.
    pub fn check_fits(&self, r: &Rect, d: Option<&ConfinementBox>) -> Result<(), GeometryError> {
        self.check()?;
        let TrapeziumParams { l, h, gamma } = *self;
        if !(l < r.half_width && h < r.half_height && l + gamma < r.half_width) {
            return Err(GeometryError::InvalidTrapezium(format!(
                "family does not fit in R = (-{}, {}) x (-{}, {})",
                r.half_width, r.half_width, r.half_height, r.half_height
            )));
        }
        if let Some(d) = d {
            if !(l + gamma <= d.half_width && h <= d.half_height) {
                return Err(GeometryError::InvalidTrapezium("family does not fit in D".into()));
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        4.0 * self.l * self.h + self.h * self.gamma
    }

    /// The undeformed trapezium `B_0`.
    pub fn body(&self) -> BodyShape {
        body_family(0.0, self).expect("eps = 0 is in range")
    }
}

/// The two moving vertices of `B_eps`: the top-right corner `(x_a, h)` and the
/// lower-right corner `(x_b, (1 - 2 eps) h)`.
pub fn family_moving_vertices(eps: f64, p: &TrapeziumParams) -> Result<(Point, Point), GeometryError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(GeometryError::EpsOutOfRange(eps));
    }
    let TrapeziumParams { l, h, gamma } = *p;
    let y = (1.0 - 2.0 * eps) * h;
    let (xa, xb) = if eps <= 2.0 / 3.0 {
        let x = l + gamma / (1.0 + eps);
        (x, x)
    } else {
        let den = 15.0 * eps - 9.0 * eps * eps - 1.0;
        (l + 9.0 * gamma * (1.0 - eps) / den, l + gamma * (6.0 * eps - 1.0) / den)
    };
    Ok(([xa, h], [xb, y]))
}

/// Raw five-vertex loop of `B_eps` before canonicalization:
/// `(-l,-h), (l,-h), P_a, P_b, (-l,h)` in clockwise-free order. The vertex
/// correspondence is the same for every `eps`, which is what mesh morphing
/// needs. At `eps = 0` two of the vertices coincide.
pub fn body_family_raw(eps: f64, p: &TrapeziumParams) -> Result<[Point; 5], GeometryError> {
    let (pa, pb) = family_moving_vertices(eps, p)?;
    let TrapeziumParams { l, h, .. } = *p;
    Ok([[-l, -h], [l, -h], pb, pa, [-l, h]])
}

/// Member `B_eps` of the area-preserving family joining the trapezium
/// (`eps = 0`) to its reflection (`eps = 1`).
pub fn body_family(eps: f64, p: &TrapeziumParams) -> Result<BodyShape, GeometryError> {
    p.check()?;
    let raw = body_family_raw(eps, p)?;
    BodyShape::new(raw.to_vec())
}

/// Convex hull (Andrew's monotone chain), counterclockwise.
pub fn convex_hull(points: &[Point]) -> Result<BodyShape, GeometryError> {
    let mut pts: Vec<Point> = points.to_vec();
    if pts.iter().flatten().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::TooFewVertices(pts.len()));
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    BodyShape::new(hull)
}

// ---------------------------------------------------------------------------
// small vector helpers

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Twice the signed area of `(a, b, c)`; positive for a left turn.
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

pub(crate) fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        s += cross(pts[i], pts[(i + 1) % n]);
    }
    0.5 * s
}

pub(crate) fn bbox(pts: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn collinear_tol(pts: &[Point]) -> f64 {
    let (lo, hi) = bbox(pts);
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    1e-12 * scale * scale
}

fn winding_inside(pts: &[Point], p: Point) -> bool {
    let n = pts.len();
    let mut inside = false;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn canonicalize(mut pts: Vec<Point>) -> Result<Vec<Point>, GeometryError> {
    if pts.iter().flatten().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let n_in = pts.len();
    if n_in < 3 {
        return Err(GeometryError::TooFewVertices(n_in));
    }
    let (lo, hi) = bbox(&pts);
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let dup_tol = 1e-12 * scale;
    let col_tol = 1e-12 * scale * scale;

    // drop repeated vertices, including across the wrap-around
    let mut out: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        if out.last().map_or(true, |&q| dist(p, q) > dup_tol) {
            out.push(p);
        }
    }
    while out.len() > 1 && dist(out[0], out[out.len() - 1]) <= dup_tol {
        out.pop();
    }
    if signed_area(&out) < 0.0 {
        out.reverse();
    }
    // drop collinear vertices until none remain
    loop {
        let n = out.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        let drop = (0..n).find(|&i| {
            let a = out[(i + n - 1) % n];
            let c = out[(i + 1) % n];
            orient(a, out[i], c).abs() <= col_tol
        });
        match drop {
            Some(i) => {
                out.remove(i);
            }
            None => break,
        }
    }
    if signed_area(&out) <= 0.0 {
        return Err(GeometryError::TooFewVertices(out.len()));
    }
    let first = (0..out.len())
        .min_by(|&i, &j| out[i].partial_cmp(&out[j]).expect("finite"))
        .expect("non-empty");
    out.rotate_left(first);
    Ok(out)
}
