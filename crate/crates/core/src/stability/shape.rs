use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{gamma_estimate, GammaConfig, GammaEstimate, StabilityError};
use crate::flowshape::FlowClassParams;
use crate::geometry::{convex_hull, is_admissible_body, BodyClass, BodyReport, BodyShape, Point, Rect};

/// Closest-in-spirit member of `C_{α,D}`: convex hull, scaling about the
/// barycenter to area `α`, then a shift into `D`. Shapes too large for `D`
/// are clipped to it and rescaled until both conditions hold.
pub fn project_to_class(points: &[Point], bc: &BodyClass, max_iters: usize) -> Result<BodyShape, StabilityError> {
    // a hair inside D so rounding in the final shift cannot leave it
    let a = bc.d.half_width * (1.0 - 1e-12);
    let b = bc.d.half_height * (1.0 - 1e-12);
    let mut pts = points.to_vec();
    for _ in 0..max_iters.max(1) {
        let hull = convex_hull(&pts)?;
        let c = hull.barycenter();
        let k = (bc.alpha / hull.area()).sqrt();
        let scaled = hull.scale_about(c, k, k);
        let (lo, hi) = scaled.bbox();
        if hi[0] - lo[0] <= 2.0 * a && hi[1] - lo[1] <= 2.0 * b {
            let body = scaled.translate([shift_into(lo[0], hi[0], a), shift_into(lo[1], hi[1], b)]);
            if is_admissible_body(&body, bc).admissible {
                return Ok(body);
            }
            pts = body.vertices().to_vec();
            continue;
        }
        let centred = scaled.translate([-0.5 * (lo[0] + hi[0]), -0.5 * (lo[1] + hi[1])]);
        pts = clip_to_box(centred.vertices(), a, b);
    }
    Err(StabilityError::ProjectionFailed(max_iters))
}

fn shift_into(lo: f64, hi: f64, a: f64) -> f64 {
    if lo < -a {
        -a - lo
    } else if hi > a {
        a - hi
    } else {
        0.0
    }
}

/// Sutherland–Hodgman clipping of a convex loop to `[-a, a] x [-b, b]`.
fn clip_to_box(poly: &[Point], a: f64, b: f64) -> Vec<Point> {
    let planes: [(usize, f64, f64); 4] = [(0, 1.0, a), (0, -1.0, a), (1, 1.0, b), (1, -1.0, b)];
    let mut out = poly.to_vec();
    for (axis, sign, lim) in planes {
        let inside = |p: &Point| sign * p[axis] <= lim;
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let (p, q) = (input[i], input[(i + 1) % input.len()]);
            match (inside(&p), inside(&q)) {
                (true, true) => out.push(q),
                (true, false) | (false, true) => {
                    let t = (sign * lim - p[axis]) / (q[axis] - p[axis]);
                    let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                    out.push(x);
                    if !inside(&p) {
                        out.push(q);
                    }
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Where the search looks for bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpace {
    /// Star-shaped `n`-gons `c + r_k (cos φ_k, sin φ_k)`, `φ_k = 2πk/n`,
    /// projected into the class.
    Polygon {
        vertices: usize,
        #[serde(default)]
        initial: Option<BodyShape>,
    },
    /// A finite list of admissible bodies, evaluated exhaustively.
    Discrete { shapes: Vec<BodyShape> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeOptConfig {
    /// `(1+λ)` generations; zero evaluates only the initial body.
    pub generations: usize,
    pub offspring: usize,
    /// Initial mutation size (log-radius units).
    pub sigma: f64,
    pub seed: u64,
    pub max_projection_iters: usize,
    pub gamma: GammaConfig,
}

impl Default for ShapeOptConfig {
    fn default() -> Self {
        ShapeOptConfig {
            generations: 10,
            offspring: 4,
            sigma: 0.15,
            seed: 0,
            max_projection_iters: 200,
            gamma: GammaConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeIterate {
    pub index: usize,
    pub generation: usize,
    pub body: Option<BodyShape>,
    pub gamma: Option<f64>,
    pub best_so_far: f64,
    pub admissible: bool,
    #[serde(default)]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeOptResult {
    pub best: BodyShape,
    pub gamma: f64,
    pub estimate: GammaEstimate,
    pub history: Vec<ShapeIterate>,
    pub feasibility: BodyReport,
}

/// Search `C_{α,D}` for the body with the smallest estimated `γ_{r,U}`.
pub fn optimize_body(
    rect: &Rect,
    bc: &BodyClass,
    class: &FlowClassParams,
    lambda_max: f64,
    space: &ShapeSpace,
    cfg: &ShapeOptConfig,
) -> Result<ShapeOptResult, StabilityError> {
    bc.check(rect)?;
    let evaluate = |body: &BodyShape| gamma_estimate(rect, body, class, lambda_max, &cfg.gamma);
    let mut run = Run { history: Vec::new(), best: None };
    match space {
        ShapeSpace::Discrete { shapes } => {
            if shapes.is_empty() {
                return Err(StabilityError::InvalidConfig("empty shape list".into()));
            }
            for (i, s) in shapes.iter().enumerate() {
                let report = is_admissible_body(s, bc);
                if !report.admissible {
                    return Err(StabilityError::InvalidConfig(format!("shape {i} is not admissible: {:?}", report.violations)));
                }
            }
            let results = crate::par_map(shapes, evaluate);
            for (s, r) in shapes.iter().zip(results) {
                run.record(0, Ok(s.clone()), r, bc);
            }
        }
        ShapeSpace::Polygon { vertices, initial } => {
            let n = *vertices;
            if n < 3 {
                return Err(StabilityError::InvalidConfig("polygon search needs at least 3 vertices".into()));
            }
            let to_body = |theta: &[f64]| project_to_class(&polygon(theta), bc, cfg.max_projection_iters);
            let mut parent = match initial {
                Some(b) => fit_polygon(b, n),
                None => {
                    let r = (2.0 * bc.alpha / (n as f64 * (2.0 * PI / n as f64).sin())).sqrt();
                    let mut t = vec![0.0, 0.0];
                    t.extend(std::iter::repeat(r.ln()).take(n));
                    t
                }
            };
            let body = to_body(&parent)?;
            let est = evaluate(&body);
            let mut parent_gamma = est.as_ref().map_or(f64::INFINITY, |e| e.value);
            run.record(0, Ok(body), est, bc);
            if !parent_gamma.is_finite() {
                return Err(StabilityError::InvalidConfig(format!(
                    "initial body could not be evaluated: {}",
                    run.history[0].failure.clone().unwrap_or_default()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut sigma = cfg.sigma;
            let centre_scale = bc.alpha.sqrt();
            for g in 1..=cfg.generations {
                let kids: Vec<Vec<f64>> = (0..cfg.offspring)
                    .map(|_| {
                        parent
                            .iter()
                            .enumerate()
                            .map(|(i, v)| {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                v + sigma * z * if i < 2 { centre_scale } else { 1.0 }
                            })
                            .collect()
                    })
                    .collect();
                let bodies: Vec<Result<BodyShape, StabilityError>> = kids.iter().map(|t| to_body(t)).collect();
                let results = crate::par_map(&bodies, |b| match b {
                    Ok(b) => evaluate(b),
                    Err(e) => Err(e.clone()),
                });
                let mut improved = None;
                for (k, (b, r)) in bodies.into_iter().zip(results).enumerate() {
                    if let Ok(e) = &r {
                        if e.value < parent_gamma && improved.map_or(true, |(_, v)| e.value < v) {
                            improved = Some((k, e.value));
                        }
                    }
                    run.record(g, b, r, bc);
                }
                if let Some((k, v)) = improved {
                    parent = kids[k].clone();
                    parent_gamma = v;
                    sigma *= 1.5;
                } else {
                    sigma *= 0.82;
                }
            }
        }
    }
    let Some((best, estimate)) = run.best else {
        return Err(StabilityError::InvalidConfig("no candidate could be evaluated".into()));
    };
    let feasibility = is_admissible_body(&best, bc);
    Ok(ShapeOptResult { gamma: estimate.value, best, estimate, history: run.history, feasibility })
}

struct Run {
    history: Vec<ShapeIterate>,
    best: Option<(BodyShape, GammaEstimate)>,
}

impl Run {
    fn record(
        &mut self,
        generation: usize,
        body: Result<BodyShape, StabilityError>,
        est: Result<GammaEstimate, StabilityError>,
        bc: &BodyClass,
    ) {
        let index = self.history.len();
        let (body, mut failure) = match body {
            Ok(b) => (Some(b), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let gamma = match est {
            Ok(e) => {
                let v = e.value;
                if let Some(b) = &body {
                    if self.best.as_ref().map_or(true, |(_, be)| v < be.value) {
                        self.best = Some((b.clone(), e));
                    }
                }
                Some(v)
            }
            Err(e) => {
                failure.get_or_insert(e.to_string());
                None
            }
        };
        let admissible = body.as_ref().is_some_and(|b| is_admissible_body(b, bc).admissible);
        let best_so_far = self.best.as_ref().map_or(f64::INFINITY, |(_, e)| e.value);
        self.history.push(ShapeIterate { index, generation, body, gamma, best_so_far, admissible, failure });
    }
}

/// Vertices `c + e^{ρ_k} (cos φ_k, sin φ_k)` for `θ = [c, ρ]`.
fn polygon(theta: &[f64]) -> Vec<Point> {
    let n = theta.len() - 2;
    (0..n)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let r = theta[2 + k].exp();
            [theta[0] + r * phi.cos(), theta[1] + r * phi.sin()]
        })
        .collect()
}

/// Parameters whose polygon samples the boundary of `b` along the rays from
/// its barycenter.
fn fit_polygon(b: &BodyShape, n: usize) -> Vec<f64> {
    let c = b.barycenter();
    let mut theta = vec![c[0], c[1]];
    for k in 0..n {
        let phi = 2.0 * PI * k as f64 / n as f64;
        let d = [phi.cos(), phi.sin()];
        let mut t_exit = f64::INFINITY;
        for (p, q) in b.edges() {
            // solve c + t d = p + s (q - p)
            let e = [q[0] - p[0], q[1] - p[1]];
            let den = d[0] * e[1] - d[1] * e[0];
            if den.abs() < 1e-300 {
                continue;
            }
            let w = [p[0] - c[0], p[1] - c[1]];
            let t = (w[0] * e[1] - w[1] * e[0]) / den;
            let s = (w[0] * d[1] - w[1] * d[0]) / den;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                t_exit = t_exit.min(t);
            }
        }
        theta.push(t_exit.ln());
    }
    theta
}
