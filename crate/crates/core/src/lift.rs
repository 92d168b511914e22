//! Lift on the body, `L = -e2 · ∫_{∂B} T(u, p) n` with `T = ∇u + ∇uᵀ - pI`
//! and `n` the outward normal of the fluid domain (pointing into the body).
//!
//! [`lift_boundary`] integrates the stress along the body edges.
//! [`lift_volume`] evaluates the same force as minus the weak-form residual
//! tested with a field equal to `e2` on the body and zero on the channel
//! boundary; it converges faster and is the primary evaluator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowshape::FlowShapePair;
use crate::mesh::{BoundaryTag, Mesh};
use crate::ns_solver::element::{p2_grads, p2_values, Geom, EDGE_QUAD, TRI_QUAD};
use crate::ns_solver::{BoundaryData, ConvectionForm, FlowField, NsSolver, SolverConfig, SolverError, TaylorHood};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("the mesh has no body")]
    NoBody,
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Stress integral over the body edges, using the velocity gradient of the
/// triangle owning each edge.
pub fn lift_boundary(f: &FlowField) -> Result<f64, LiftError> {
    let mesh = f.mesh();
    if mesh.body().is_none() {
        return Err(LiftError::NoBody);
    }
    let space = f.space();
    let mut total = 0.0;
    for (i, e) in mesh.boundary().iter().enumerate() {
        if e.tag != BoundaryTag::BodyBoundary {
            continue;
        }
        let t = mesh.boundary_triangle(i);
        let tri = mesh.triangles()[t];
        let el = space.elements()[t];
        let geom = Geom::new(tri.map(|v| mesh.nodes()[v]));
        let ia = tri.iter().position(|&v| v == e.edge[0]).expect("edge in its triangle");
        let ib = tri.iter().position(|&v| v == e.edge[1]).expect("edge in its triangle");
        let (a, b) = (mesh.nodes()[e.edge[0]], mesh.nodes()[e.edge[1]]);
        // outward normal of the fluid domain, scaled by the edge length
        let n = [b[1] - a[1], a[0] - b[0]];
        for (s, w) in EDGE_QUAD {
            let mut bary = [0.0; 3];
            bary[ia] = 1.0 - s;
            bary[ib] = s;
            let d = p2_grads(bary, &geom);
            let mut g = [[0.0; 2]; 2];
            for k in 0..6 {
                for c in 0..2 {
                    g[c][0] += f.velocity[el[k]][c] * d[k][0];
                    g[c][1] += f.velocity[el[k]][c] * d[k][1];
                }
            }
            let p: f64 = (0..3).map(|j| bary[j] * f.pressure[tri[j]]).sum();
            let tn2 = (g[1][0] + g[0][1]) * n[0] + (2.0 * g[1][1] - p) * n[1];
            total += w * tn2;
        }
    }
    Ok(-total)
}

/// Interior values of the scalar test function `ψ` (with `φ = ψ e2`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestExtension {
    /// `ψ = 1` on body nodes only.
    #[default]
    Minimal,
    /// `ψ = max(0, 1 - dist(x, B) / width)` at interior nodes.
    Graded { width: f64 },
}

fn test_function(space: &TaylorHood, ext: TestExtension) -> Vec<f64> {
    let mesh = space.mesh();
    let n = space.n_velocity_nodes();
    let mut psi = vec![0.0; n];
    let mut fixed = vec![false; n];
    for (i, e) in mesh.boundary().iter().enumerate() {
        let val = if e.tag == BoundaryTag::BodyBoundary { 1.0 } else { 0.0 };
        for v in [e.edge[0], e.edge[1], space.boundary_midpoint(i)] {
            if !fixed[v] {
                psi[v] = val;
                fixed[v] = true;
            } else if val == 0.0 {
                psi[v] = 0.0;
            }
        }
    }
    if let (TestExtension::Graded { width }, Some(body)) = (ext, mesh.body()) {
        for (v, p) in space.nodes().iter().enumerate() {
            if !fixed[v] {
                psi[v] = (1.0 - body.distance_to(*p) / width).max(0.0);
            }
        }
    }
    psi
}

/// Consistent volume evaluation with the default test function.
pub fn lift_volume(f: &FlowField) -> Result<f64, LiftError> {
    lift_volume_with(f, TestExtension::Minimal)
}

pub fn lift_volume_with(f: &FlowField, ext: TestExtension) -> Result<f64, LiftError> {
    lift_functional(f, &f.velocity, ext)
}

/// `-∫_Ω [∇u2·∇ψ + c(w, u2, ψ) - p ∂2ψ]` with the convecting field `w`
/// frozen; linear in `(u, p)`. With `w = u` this is [`lift_volume_with`].
pub fn lift_functional(f: &FlowField, convecting: &[[f64; 2]], ext: TestExtension) -> Result<f64, LiftError> {
    let mesh = f.mesh();
    if mesh.body().is_none() {
        return Err(LiftError::NoBody);
    }
    let space = f.space();
    let psi = test_function(space, ext);
    let mut total = 0.0;
    for (t, el) in space.elements().iter().enumerate() {
        if el.iter().all(|&v| psi[v] == 0.0) {
            continue;
        }
        let tri = mesh.triangles()[t];
        let geom = Geom::new(tri.map(|v| mesh.nodes()[v]));
        for (bary, wq) in TRI_QUAD {
            let phi = p2_values(bary);
            let d = p2_grads(bary, &geom);
            let (mut u2, mut gu2, mut w, mut ps, mut gps) = (0.0, [0.0; 2], [0.0; 2], 0.0, [0.0; 2]);
            for k in 0..6 {
                let v = el[k];
                u2 += f.velocity[v][1] * phi[k];
                gu2[0] += f.velocity[v][1] * d[k][0];
                gu2[1] += f.velocity[v][1] * d[k][1];
                w[0] += convecting[v][0] * phi[k];
                w[1] += convecting[v][1] * phi[k];
                ps += psi[v] * phi[k];
                gps[0] += psi[v] * d[k][0];
                gps[1] += psi[v] * d[k][1];
            }
            let p: f64 = (0..3).map(|j| bary[j] * f.pressure[tri[j]]).sum();
            let adv = w[0] * gu2[0] + w[1] * gu2[1];
            let conv = match f.convection {
                ConvectionForm::Standard => adv * ps,
                ConvectionForm::Skew => 0.5 * (adv * ps - (w[0] * gps[0] + w[1] * gps[1]) * u2),
            };
            total += wq * geom.area * (gu2[0] * gps[0] + gu2[1] * gps[1] + conv - p * gps[1]);
        }
    }
    Ok(-total)
}

/// Reference force for magnitude `lambda`: viscous `λV|∂B|/H` plus dynamic
/// `(λV)²|∂B|`, with `V` the largest boundary speed of the pair.
pub fn force_scale(mesh: &Mesh, pair: &FlowShapePair, lambda: f64) -> f64 {
    let v = pair.v_in.max_abs().max(pair.v_out.max_abs()).max(pair.u as f64);
    let per = mesh.body().map_or(0.0, |b| b.perimeter());
    let h = mesh.rect().half_height;
    let s = lambda * v;
    s * per / h + s * s * per
}

/// Sampled map `λ ↦ L(λ)`, starting at `(0, 0)` with strictly increasing λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftCurve {
    pub lambdas: Vec<f64>,
    pub lifts: Vec<f64>,
    pub residuals: Vec<f64>,
    pub mesh_id: String,
    pub flow_id: String,
    /// Solver failure that truncated the curve.
    #[serde(default)]
    pub failure: Option<String>,
}

impl LiftCurve {
    /// `max |L|` over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.lifts.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Index of the sample with the largest `|L|` (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, l) in self.lifts.iter().enumerate() {
            if l.abs() > self.lifts[best].abs() {
                best = i;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,lift,residual\n");
        for i in 0..self.lambdas.len() {
            s.push_str(&format!("{},{:e},{:e}\n", self.lambdas[i], self.lifts[i], self.residuals[i]));
        }
        s
    }

    /// Parse the CSV written by [`LiftCurve::to_csv`] (ids are left empty).
    pub fn from_csv(text: &str) -> Result<LiftCurve, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "lambda,lift,residual" => {}
            _ => return Err("missing header lambda,lift,residual".into()),
        }
        let mut c = LiftCurve {
            lambdas: vec![],
            lifts: vec![],
            residuals: vec![],
            mesh_id: String::new(),
            flow_id: String::new(),
            failure: None,
        };
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let num = |k: usize| -> Result<f64, String> {
                cols.get(k)
                    .ok_or_else(|| format!("row {}: missing column", i + 1))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| format!("row {}: {e}", i + 1))
            };
            c.lambdas.push(num(0)?);
            c.lifts.push(num(1)?);
            c.residuals.push(num(2)?);
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("curve serializes")
    }
}

/// Sorted, deduplicated grid starting at 0.
fn normalize_grid(lambdas: &[f64]) -> Result<Vec<f64>, LiftError> {
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(LiftError::InvalidGrid(format!("lambda {bad} must be finite and non-negative")));
    }
    let mut g = lambdas.to_vec();
    g.push(0.0);
    g.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    g.dedup();
    Ok(g)
}

/// Solve at every λ of the grid (warm-started in increasing order) and
/// evaluate [`lift_volume`].
pub fn lift_curve(mesh: &Mesh, pair: &FlowShapePair, lambdas: &[f64], cfg: &SolverConfig) -> Result<LiftCurve, LiftError> {
    if mesh.body().is_none() {
        return Err(LiftError::NoBody);
    }
    let solver = NsSolver::new(std::sync::Arc::new(mesh.clone()), cfg.clone())?;
    lift_curve_on(&solver, pair, lambdas, true)
}

/// As [`lift_curve`] on a prepared solver. Without warm starts the samples
/// are independent and run in parallel when the `parallel` feature is on.
pub fn lift_curve_on(solver: &NsSolver, pair: &FlowShapePair, lambdas: &[f64], warm_start: bool) -> Result<LiftCurve, LiftError> {
    let mesh = solver.mesh();
    if mesh.body().is_none() {
        return Err(LiftError::NoBody);
    }
    let grid = normalize_grid(lambdas)?;
    let mut curve = LiftCurve {
        lambdas: vec![0.0],
        lifts: vec![0.0],
        residuals: vec![0.0],
        mesh_id: mesh.fingerprint(),
        flow_id: pair.fingerprint(),
        failure: None,
    };
    let sample = |lambda: f64, guess: Option<&FlowField>| -> Result<(FlowField, f64), LiftError> {
        let bd = BoundaryData::new(lambda, pair.clone())?;
        let f = solver.solve_from(&bd, guess)?;
        let l = lift_volume(&f)?;
        Ok((f, l))
    };
    if warm_start {
        let mut prev: Option<FlowField> = None;
        for &lambda in &grid[1..] {
            match sample(lambda, prev.as_ref()) {
                Ok((f, l)) => {
                    curve.lambdas.push(lambda);
                    curve.lifts.push(l);
                    curve.residuals.push(f.residual);
                    prev = Some(f);
                }
                Err(e) => {
                    curve.failure = Some(format!("lambda = {lambda}: {e}"));
                    break;
                }
            }
        }
    } else {
        let results: Vec<Result<(f64, f64), LiftError>> =
            crate::par_map(&grid[1..], |&l| sample(l, None).map(|(f, v)| (v, f.residual)));
        for (&lambda, r) in grid[1..].iter().zip(results) {
            match r {
                Ok((l, res)) => {
                    curve.lambdas.push(lambda);
                    curve.lifts.push(l);
                    curve.residuals.push(res);
                }
                Err(e) => {
                    curve.failure = Some(format!("lambda = {lambda}: {e}"));
                    break;
                }
            }
        }
    }
    Ok(curve)
}
