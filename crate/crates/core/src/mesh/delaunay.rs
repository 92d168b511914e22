//! Incremental Bowyer–Watson triangulation with segment recovery and
//! Ruppert-style quality refinement.
//!
//! All geometric decisions go through the exact `orient2d`/`incircle`
//! predicates. Queues are FIFO and insertion order is fixed by the input, so
//! the output is a deterministic function of the PSLG.

use std::collections::{BTreeMap, VecDeque};

use robust::{incircle, orient2d, Coord};

use super::{BoundaryTag, MeshError};
use crate::geometry::{dist, Point};

const NONE: usize = usize::MAX;

/// Segment label: a boundary tag, or `None` for the mirror axis of a
/// half-domain.
pub(crate) type SegTag = Option<BoundaryTag>;

/// Planar straight-line graph describing a polygonal domain. The region inside
/// is determined by crossing parity.
pub(crate) struct Pslg {
    pub points: Vec<Point>,
    pub segments: Vec<([usize; 2], SegTag)>,
}

pub(crate) struct RawMesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub segments: Vec<([usize; 2], SegTag)>,
}

#[derive(Clone)]
struct Tri {
    v: [usize; 3],
    // n[i] is the neighbour across the edge opposite v[i]
    n: [usize; 3],
    alive: bool,
    inside: bool,
}

struct Cavity {
    tris: Vec<usize>,
    // (a, b, outer neighbour, inside flag of the removed owner)
    boundary: Vec<(usize, usize, usize, bool)>,
}

pub(crate) struct RefineOptions<'a> {
    pub min_angle_deg: f64,
    pub size: &'a dyn Fn(Point) -> f64,
    pub max_points: usize,
}

struct Triangulation {
    pts: Vec<Point>,
    tris: Vec<Tri>,
    vtri: Vec<usize>,
    last: usize,
    segs: BTreeMap<(usize, usize), SegTag>,
    input_vertex: Vec<bool>,
    stamp: Vec<u32>,
    cur: u32,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn c(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

impl Triangulation {
    fn new(pslg: &Pslg) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &pslg.points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let m = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let pts = vec![[cx - 40.0 * m, cy - 30.0 * m], [cx + 40.0 * m, cy - 30.0 * m], [cx, cy + 40.0 * m]];
        let tris = vec![Tri { v: [0, 1, 2], n: [NONE; 3], alive: true, inside: false }];
        Triangulation {
            pts,
            tris,
            vtri: vec![0, 0, 0],
            last: 0,
            segs: BTreeMap::new(),
            input_vertex: vec![false; 3],
            stamp: vec![0],
            cur: 0,
        }
    }

    fn orient(&self, a: usize, b: usize, p: Point) -> f64 {
        orient2d(c(self.pts[a]), c(self.pts[b]), c(p))
    }

    fn in_circumcircle(&self, t: usize, p: Point) -> bool {
        let v = self.tris[t].v;
        incircle(c(self.pts[v[0]]), c(self.pts[v[1]]), c(self.pts[v[2]]), c(p)) > 0.0
    }

    fn is_seg(&self, a: usize, b: usize) -> bool {
        self.segs.contains_key(&key(a, b))
    }

    /// Visibility walk to a triangle containing `p` (closed).
    fn locate(&self, p: Point, start: usize) -> usize {
        let mut t = if start < self.tris.len() && self.tris[start].alive { start } else { self.any_alive() };
        let limit = 4 * self.tris.len() + 64;
        let mut steps = 0usize;
        'walk: loop {
            steps += 1;
            if steps > limit {
                return self.locate_linear(p);
            }
            let tri = &self.tris[t];
            for k in 0..3 {
                let i = (k + steps) % 3;
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if self.orient(a, b, p) < 0.0 {
                    let nb = tri.n[i];
                    if nb == NONE {
                        return self.locate_linear(p);
                    }
                    t = nb;
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn locate_linear(&self, p: Point) -> usize {
        (0..self.tris.len())
            .find(|&t| {
                let tri = &self.tris[t];
                tri.alive && (0..3).all(|i| self.orient(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p) >= 0.0)
            })
            .unwrap_or_else(|| self.any_alive())
    }

    fn any_alive(&self) -> usize {
        (0..self.tris.len()).rev().find(|&t| self.tris[t].alive).expect("triangulation is never empty")
    }

    fn next_stamp(&mut self) -> u32 {
        if self.stamp.len() < self.tris.len() {
            self.stamp.resize(self.tris.len(), 0);
        }
        self.cur = self.cur.wrapping_add(1);
        if self.cur == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.cur = 1;
        }
        self.cur
    }

    /// Triangles whose circumcircle contains `p`, grown from `t0`. With
    /// `constrained`, segments stop the growth except `allow`.
    fn cavity(&mut self, p: Point, t0: usize, constrained: bool, allow: Option<(usize, usize)>) -> Result<Cavity, MeshError> {
        let s = self.next_stamp();
        self.stamp[t0] = s;
        let mut tris = vec![t0];
        let mut k = 0;
        while k < tris.len() {
            let t = tris[k];
            k += 1;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb == NONE || self.stamp[nb] == s {
                    continue;
                }
                let a = self.tris[t].v[(i + 1) % 3];
                let b = self.tris[t].v[(i + 2) % 3];
                if constrained && self.is_seg(a, b) && allow != Some(key(a, b)) {
                    continue;
                }
                if self.in_circumcircle(nb, p) {
                    self.stamp[nb] = s;
                    tris.push(nb);
                }
            }
        }
        // shrink until every boundary edge sees p strictly on its left
        loop {
            let boundary = self.cavity_boundary(&tris, s);
            let bad: Vec<usize> = boundary
                .iter()
                .filter(|(a, b, _, _)| self.orient(*a, *b, p) <= 0.0)
                .map(|(a, b, _, _)| self.owner_of_edge(&tris, s, *a, *b))
                .collect();
            if bad.is_empty() {
                return Ok(Cavity { tris, boundary });
            }
            for t in bad {
                if t == t0 {
                    return Err(MeshError::Generation("degenerate insertion cavity".into()));
                }
                self.stamp[t] = 0;
                tris.retain(|&x| x != t);
            }
        }
    }

    fn cavity_boundary(&self, tris: &[usize], s: u32) -> Vec<(usize, usize, usize, bool)> {
        let mut out = Vec::new();
        for &t in tris {
            let tri = &self.tris[t];
            for i in 0..3 {
                let nb = tri.n[i];
                if nb == NONE || self.stamp[nb] != s {
                    out.push((tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], nb, tri.inside));
                }
            }
        }
        out
    }

    fn owner_of_edge(&self, tris: &[usize], s: u32, a: usize, b: usize) -> usize {
        *tris
            .iter()
            .find(|&&t| {
                let tri = &self.tris[t];
                (0..3).any(|i| {
                    tri.v[(i + 1) % 3] == a && tri.v[(i + 2) % 3] == b && (tri.n[i] == NONE || self.stamp[tri.n[i]] != s)
                })
            })
            .expect("boundary edge has an owner")
    }

    /// Replace the cavity by a fan around the new point. Returns the new
    /// point's index and the new triangles.
    fn fill(&mut self, p: Point, cav: Cavity) -> (usize, Vec<usize>) {
        let pi = self.pts.len();
        self.pts.push(p);
        self.input_vertex.push(false);
        self.vtri.push(NONE);
        for &t in &cav.tris {
            self.tris[t].alive = false;
        }
        let mut new = Vec::with_capacity(cav.boundary.len());
        for &(a, b, outer, inside) in &cav.boundary {
            let t = self.tris.len();
            self.tris.push(Tri { v: [a, b, pi], n: [NONE, NONE, outer], alive: true, inside });
            if outer != NONE {
                let o = &mut self.tris[outer];
                for i in 0..3 {
                    if o.v[(i + 1) % 3] == b && o.v[(i + 2) % 3] == a {
                        o.n[i] = t;
                    }
                }
            }
            self.vtri[a] = t;
            self.vtri[b] = t;
            new.push(t);
        }
        self.vtri[pi] = *new.first().expect("non-empty cavity");
        // link the fan: tri [a, b, p] meets [b, c, p] across (b, p)
        for &t in &new {
            let [a, b, _] = self.tris[t].v;
            let after = *new.iter().find(|&&u| self.tris[u].v[0] == b).expect("closed fan");
            let before = *new.iter().find(|&&u| self.tris[u].v[1] == a).expect("closed fan");
            self.tris[t].n[0] = after;
            self.tris[t].n[1] = before;
        }
        self.last = new[0];
        self.stamp.resize(self.tris.len(), 0);
        (pi, new)
    }

    fn insert(&mut self, p: Point, hint: usize, constrained: bool) -> Result<Option<(usize, Vec<usize>)>, MeshError> {
        let t = self.locate(p, hint);
        if self.tris[t].v.iter().any(|&v| self.pts[v] == p) {
            return Ok(None);
        }
        let cav = self.cavity(p, t, constrained, None)?;
        Ok(Some(self.fill(p, cav)))
    }

    /// Triangle and local index `i` with edge `(a, b)` = `(v[i+1], v[i+2])`.
    fn find_edge(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        let start = self.vtri[a];
        if start == NONE {
            return None;
        }
        let mut t = start;
        for _ in 0..10_000 {
            let tri = &self.tris[t];
            let j = tri.v.iter().position(|&v| v == a)?;
            let nxt = tri.v[(j + 1) % 3];
            let prv = tri.v[(j + 2) % 3];
            if nxt == b {
                return Some((t, (j + 2) % 3));
            }
            if prv == b {
                // edge (b, a) here; the twin lives across
                let nb = tri.n[(j + 1) % 3];
                return if nb == NONE { None } else { self.find_edge_in(nb, a, b) };
            }
            // rotate clockwise around a: cross the edge (a, nxt)
            let nb = tri.n[(j + 2) % 3];
            if nb == NONE || nb == start {
                break;
            }
            t = nb;
        }
        // fan was open (super vertex) or not found; scan
        (0..self.tris.len()).filter(|&t| self.tris[t].alive).find_map(|t| self.find_edge_in(t, a, b))
    }

    fn find_edge_in(&self, t: usize, a: usize, b: usize) -> Option<(usize, usize)> {
        let tri = &self.tris[t];
        (0..3).find(|&i| tri.v[(i + 1) % 3] == a && tri.v[(i + 2) % 3] == b).map(|i| (t, i))
    }

    fn edge_exists(&self, a: usize, b: usize) -> bool {
        self.find_edge(a, b).is_some() || self.find_edge(b, a).is_some()
    }

    /// Split point for a segment: midpoint, or a power-of-two distance from an
    /// input endpoint so that splits near acute input corners stay on shared
    /// concentric shells.
    fn split_point(&self, a: usize, b: usize) -> Point {
        let (pa, pb) = (self.pts[a], self.pts[b]);
        let len = dist(pa, pb);
        let shell_from = match (self.input_vertex[a], self.input_vertex[b]) {
            (true, false) => Some((pa, pb)),
            (false, true) => Some((pb, pa)),
            _ => None,
        };
        if let Some((o, q)) = shell_from {
            let d = 2f64.powf((0.5 * len).log2().round());
            if d > 0.25 * len && d < 0.75 * len {
                let t = d / len;
                return [o[0] + t * (q[0] - o[0]), o[1] + t * (q[1] - o[1])];
            }
        }
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Insert a point on segment `(a, b)`, replacing it by two subsegments.
    fn split_segment(&mut self, a: usize, b: usize, constrained: bool) -> Result<(usize, Vec<usize>), MeshError> {
        let tag = self.segs.remove(&key(a, b)).expect("splitting a live segment");
        let m = self.split_point(a, b);
        let (t, _) = self
            .find_edge(a, b)
            .or_else(|| self.find_edge(b, a))
            .ok_or_else(|| MeshError::Generation("segment lost during refinement".into()))?;
        let cav = if constrained {
            self.cavity(m, t, true, Some(key(a, b)))?
        } else {
            let t = self.locate(m, t);
            self.cavity(m, t, false, None)?
        };
        let (mi, new) = self.fill(m, cav);
        self.segs.insert(key(a, mi), tag);
        self.segs.insert(key(mi, b), tag);
        Ok((mi, new))
    }

    fn recover_segments(&mut self, max_points: usize) -> Result<(), MeshError> {
        loop {
            let missing: Vec<(usize, usize)> =
                self.segs.keys().copied().filter(|&(a, b)| !self.edge_exists(a, b)).collect();
            if missing.is_empty() {
                return Ok(());
            }
            for (a, b) in missing {
                if self.segs.contains_key(&(a, b)) && !self.edge_exists(a, b) {
                    self.split_segment(a, b, false)?;
                    if self.pts.len() > max_points {
                        return Err(MeshError::TooLarge(max_points));
                    }
                }
            }
        }
    }

    /// Parity flood fill from the super triangle: crossing a segment toggles.
    fn classify(&mut self) {
        let n = self.tris.len();
        let mut seen = vec![false; n];
        let start = (0..n).find(|&t| self.tris[t].alive && self.tris[t].v.iter().any(|&v| v < 3)).expect("super fan");
        let mut queue = VecDeque::new();
        queue.push_back((start, false));
        seen[start] = true;
        while let Some((t, inside)) = queue.pop_front() {
            self.tris[t].inside = inside;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb == NONE || seen[nb] {
                    continue;
                }
                seen[nb] = true;
                let a = self.tris[t].v[(i + 1) % 3];
                let b = self.tris[t].v[(i + 2) % 3];
                queue.push_back((nb, inside ^ self.is_seg(a, b)));
            }
        }
    }

    fn circumcenter(&self, t: usize) -> Point {
        let [a, b, cc] = self.tris[t].v.map(|v| self.pts[v]);
        let (bx, by) = (b[0] - a[0], b[1] - a[1]);
        let (cx, cy) = (cc[0] - a[0], cc[1] - a[1]);
        let d = 2.0 * (bx * cy - by * cx);
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
    }

    fn is_bad(&self, t: usize, sin_min: f64, size: &dyn Fn(Point) -> f64) -> bool {
        let tri = &self.tris[t];
        if !tri.alive || !tri.inside {
            return false;
        }
        let [a, b, cc] = tri.v.map(|v| self.pts[v]);
        let (la, lb, lc) = (dist(b, cc), dist(cc, a), dist(a, b));
        let area2 = (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
        let r = la * lb * lc / (2.0 * area2);
        let shortest = la.min(lb).min(lc);
        let centroid = [(a[0] + b[0] + cc[0]) / 3.0, (a[1] + b[1] + cc[1]) / 3.0];
        shortest < 2.0 * r * sin_min || r > size(centroid) / 3f64.sqrt()
    }

    fn encroaches(&self, q: Point, a: usize, b: usize) -> bool {
        let (pa, pb) = (self.pts[a], self.pts[b]);
        (pa[0] - q[0]) * (pb[0] - q[0]) + (pa[1] - q[1]) * (pb[1] - q[1]) < 0.0
    }

    /// Apexes of the inside triangles on either side of segment `(a, b)`.
    fn segment_encroached(&self, a: usize, b: usize) -> bool {
        [(a, b), (b, a)].iter().any(|&(x, y)| {
            self.find_edge(x, y).is_some_and(|(t, i)| {
                let tri = &self.tris[t];
                tri.inside && self.encroaches(self.pts[tri.v[i]], a, b)
            })
        })
    }

    fn refine(&mut self, opts: &RefineOptions) -> Result<(), MeshError> {
        let sin_min = opts.min_angle_deg.to_radians().sin();
        let mut segq: VecDeque<(usize, usize)> = self.segs.keys().copied().filter(|&(a, b)| self.segment_encroached(a, b)).collect();
        let mut triq: VecDeque<usize> = (0..self.tris.len()).filter(|&t| self.is_bad(t, sin_min, opts.size)).collect();
        let mut skipped = std::collections::BTreeSet::new();
        loop {
            if self.pts.len() > opts.max_points {
                return Err(MeshError::TooLarge(opts.max_points));
            }
            if let Some((a, b)) = segq.pop_front() {
                if !self.segs.contains_key(&(a, b)) {
                    continue;
                }
                let (mi, new) = self.split_segment(a, b, true)?;
                self.after_insert(mi, &new, &mut segq, &mut triq, sin_min, opts);
                for (x, y) in [key(a, mi), key(mi, b)] {
                    if self.segment_encroached(x, y) {
                        segq.push_back((x, y));
                    }
                }
                continue;
            }
            let Some(t) = triq.pop_front() else { break };
            if !self.is_bad(t, sin_min, opts.size) || skipped.contains(&self.tris[t].v) {
                continue;
            }
            let cc = self.circumcenter(t);
            if !cc.iter().all(|x| x.is_finite()) {
                skipped.insert(self.tris[t].v);
                continue;
            }
            match self.walk_to(t, cc) {
                Walk::Blocked(a, b) => {
                    if self.encroaches(cc, a, b) {
                        segq.push_back(key(a, b));
                        triq.push_back(t);
                    } else {
                        skipped.insert(self.tris[t].v);
                    }
                }
                Walk::Found(tc) => {
                    if !self.tris[tc].inside || self.tris[tc].v.iter().any(|&v| self.pts[v] == cc) {
                        skipped.insert(self.tris[t].v);
                        continue;
                    }
                    let cav = self.cavity(cc, tc, true, None)?;
                    let enc: Vec<(usize, usize)> = cav
                        .boundary
                        .iter()
                        .filter(|(a, b, _, _)| self.is_seg(*a, *b) && self.encroaches(cc, *a, *b))
                        .map(|(a, b, _, _)| key(*a, *b))
                        .collect();
                    if !enc.is_empty() {
                        segq.extend(enc);
                        triq.push_back(t);
                        continue;
                    }
                    let (pi, new) = self.fill(cc, cav);
                    self.after_insert(pi, &new, &mut segq, &mut triq, sin_min, opts);
                }
            }
        }
        Ok(())
    }

    fn after_insert(
        &self,
        pi: usize,
        new: &[usize],
        segq: &mut VecDeque<(usize, usize)>,
        triq: &mut VecDeque<usize>,
        sin_min: f64,
        opts: &RefineOptions,
    ) {
        let p = self.pts[pi];
        for &t in new {
            let tri = &self.tris[t];
            // outer edge of the fan triangle is (v0, v1)
            let (a, b) = (tri.v[0], tri.v[1]);
            if tri.inside && self.is_seg(a, b) && self.encroaches(p, a, b) {
                segq.push_back(key(a, b));
            }
            if self.is_bad(t, sin_min, opts.size) {
                triq.push_back(t);
            }
        }
    }

    /// Walk from triangle `t` toward `p` without crossing segments.
    fn walk_to(&self, t: usize, p: Point) -> Walk {
        let mut t = t;
        let limit = 4 * self.tris.len() + 64;
        'walk: for step in 0..limit {
            let tri = &self.tris[t];
            for k in 0..3 {
                let i = (k + step) % 3;
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if self.orient(a, b, p) < 0.0 {
                    if self.is_seg(a, b) {
                        return Walk::Blocked(a, b);
                    }
                    let nb = tri.n[i];
                    if nb == NONE {
                        return Walk::Blocked(a, b);
                    }
                    t = nb;
                    continue 'walk;
                }
            }
            return Walk::Found(t);
        }
        Walk::Found(self.locate_linear(p))
    }

    fn extract(&self) -> Result<RawMesh, MeshError> {
        let mut map = vec![NONE; self.pts.len()];
        let inside: Vec<usize> = (0..self.tris.len()).filter(|&t| self.tris[t].alive && self.tris[t].inside).collect();
        for &t in &inside {
            for &v in &self.tris[t].v {
                if v < 3 {
                    return Err(MeshError::Generation("domain touches the bounding triangle".into()));
                }
                map[v] = 0;
            }
        }
        let mut nodes = Vec::new();
        for (v, m) in map.iter_mut().enumerate() {
            if *m == 0 {
                *m = nodes.len();
                nodes.push(self.pts[v]);
            }
        }
        let triangles = inside.iter().map(|&t| self.tris[t].v.map(|v| map[v])).collect();
        let mut segments = Vec::with_capacity(self.segs.len());
        for (&(a, b), &tag) in &self.segs {
            // orient with the domain on the left
            let inside_ab = self.find_edge(a, b).is_some_and(|(t, _)| self.tris[t].inside);
            let inside_ba = self.find_edge(b, a).is_some_and(|(t, _)| self.tris[t].inside);
            match (inside_ab, inside_ba) {
                (true, false) => segments.push(([map[a], map[b]], tag)),
                (false, true) => segments.push(([map[b], map[a]], tag)),
                _ => return Err(MeshError::Generation("segment is not on the domain boundary".into())),
            }
        }
        Ok(RawMesh { nodes, triangles, segments })
    }
}

enum Walk {
    Found(usize),
    Blocked(usize, usize),
}

/// Triangulate and refine the domain described by `pslg`.
pub(crate) fn triangulate(pslg: &Pslg, opts: &RefineOptions) -> Result<RawMesh, MeshError> {
    let mut tr = Triangulation::new(pslg);
    let mut index = Vec::with_capacity(pslg.points.len());
    for &p in &pslg.points {
        let hint = tr.last;
        match tr.insert(p, hint, false)? {
            Some((i, _)) => {
                tr.input_vertex[i] = true;
                index.push(i);
            }
            None => return Err(MeshError::Generation(format!("duplicate input point {p:?}"))),
        }
    }
    for &([a, b], tag) in &pslg.segments {
        tr.segs.insert(key(index[a], index[b]), tag);
    }
    // only polygon corners count as input vertices for shell splitting
    let mut degree = vec![0usize; tr.pts.len()];
    let mut dir: Vec<Option<Point>> = vec![None; tr.pts.len()];
    let mut corner = vec![false; tr.pts.len()];
    for &([a, b], _) in &pslg.segments {
        for (u, w) in [(index[a], index[b]), (index[b], index[a])] {
            degree[u] += 1;
            let d = [tr.pts[w][0] - tr.pts[u][0], tr.pts[w][1] - tr.pts[u][1]];
            match dir[u] {
                None => dir[u] = Some(d),
                Some(e) => {
                    if (d[0] * e[1] - d[1] * e[0]).abs() > 1e-9 * (d[0].hypot(d[1]) * e[0].hypot(e[1])) {
                        corner[u] = true;
                    }
                }
            }
        }
    }
    for (v, flag) in tr.input_vertex.iter_mut().enumerate() {
        *flag = *flag && corner[v];
    }
    tr.recover_segments(opts.max_points)?;
    tr.classify();
    tr.refine(opts)?;
    tr.extract()
}
