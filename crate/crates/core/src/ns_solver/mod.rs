//! Steady incompressible Navier–Stokes in the channel with an obstacle:
//! `-Δu + u·∇u + ∇p = 0`, `∇·u = 0`, with `u = 0` on the body and the bottom
//! wall, `λU e1` on the top wall and `λV_in e1`, `λV_out e1` on the inflow and
//! outflow sides.
//!
//! Taylor–Hood P2/P1 elements, Dirichlet data imposed at the velocity nodes,
//! Newton iteration with continuation in λ and a Picard fallback. One
//! pressure value is pinned during the solve and the pressure is shifted to
//! zero mean afterwards.

mod assembly;
pub(crate) mod element;
mod lambda_max;
mod space;

use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowshape::{flux, FlowShapePair};
use crate::mesh::{BoundaryTag, Mesh};
use assembly::{element, global_dof, Linearization, Pattern, NLOC};
use element::{p2_grads, Geom, TRI_QUAD};

pub use lambda_max::{empty_rect_sobolev_proxy, estimate_lambda_max, LambdaEstimate, LambdaFlag, LambdaProbe, LambdaSearch};
pub use space::TaylorHood;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("boundary data inconsistent with the mesh: {0}")]
    DataMismatch(String),
    #[error("Newton did not converge at lambda = {lambda} (last converged lambda {reached}, residual {residual:e})")]
    Divergence { lambda: f64, reached: f64, residual: f64 },
    #[error("singular linear system: {0}")]
    Singular(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionForm {
    /// `(w·∇u)·v`
    #[default]
    Standard,
    /// `½[(w·∇u)·v − (w·∇v)·u]`
    Skew,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Euclidean norm of the discrete residual at which Newton stops.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Initial number of λ steps; a failed step is halved up to
    /// `max_step_halvings` times.
    pub continuation_steps: usize,
    pub max_step_halvings: usize,
    pub convection: ConvectionForm,
    /// Picard iterations taken when a Newton step fails to reduce the residual.
    pub picard_iters: usize,
    /// A linear solve whose relative residual exceeds this is reported as
    /// singular.
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton_iters: 25,
            continuation_steps: 1,
            max_step_halvings: 6,
            convection: ConvectionForm::Standard,
            picard_iters: 4,
            linear_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), SolverError> {
        let bad = |s: &str| Err(SolverError::InvalidConfig(s.into()));
        if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
            return bad("newton_tol must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        if self.continuation_steps == 0 {
            return bad("continuation_steps must be at least 1");
        }
        if !(self.linear_tol > 0.0) {
            return bad("linear_tol must be positive");
        }
        Ok(())
    }
}

/// Flow magnitude and shape for one solve; the top-wall flag `U` is carried by
/// the pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub lambda: f64,
    pub pair: FlowShapePair,
}

impl BoundaryData {
    pub fn new(lambda: f64, pair: FlowShapePair) -> Result<Self, SolverError> {
        let bd = BoundaryData { lambda, pair };
        bd.check()?;
        Ok(bd)
    }

    pub fn u(&self) -> u8 {
        self.pair.u
    }

    /// The profiles must carry compatible data: equal fluxes and wall values
    /// `V(-H) = 0`, `V(H) = U`.
    pub fn check(&self) -> Result<(), SolverError> {
        let bad = |s: String| Err(SolverError::DataMismatch(s));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be finite and non-negative", self.lambda));
        }
        let h = self.pair.half_height();
        let u = self.pair.u as f64;
        for (name, v) in [("inflow", &self.pair.v_in), ("outflow", &self.pair.v_out)] {
            if (v.eval(-h)).abs() > 1e-9 || (v.eval(h) - u).abs() > 1e-9 {
                return bad(format!("{name} profile does not match the wall velocities"));
            }
        }
        let (fi, fo) = (flux(&self.pair.v_in), flux(&self.pair.v_out));
        if (fi - fo).abs() > 1e-6 * (1.0 + fi.abs()) {
            return bad(format!("inflow flux {fi} differs from outflow flux {fo}"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Start,
    Newton,
    Picard,
}

/// One line of the solver log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub lambda: f64,
    pub iteration: usize,
    pub kind: StepKind,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    pub continuation_steps: usize,
    pub failed_steps: usize,
    pub log: Vec<LogEntry>,
}

/// Discrete solution: velocity at the P2 nodes, zero-mean pressure at the
/// mesh vertices.
#[derive(Clone, Debug)]
pub struct FlowField {
    space: Arc<TaylorHood>,
    pub velocity: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
    pub lambda: f64,
    /// Residual norm reached by the nonlinear solver.
    pub residual: f64,
    /// Convection form the field was solved with.
    pub convection: ConvectionForm,
    pub stats: SolveStats,
}

#[derive(Serialize)]
struct FieldExport<'a> {
    mesh_ref: String,
    lambda: f64,
    residual: f64,
    velocity_nodes: &'a [[f64; 2]],
    velocity: &'a [[f64; 2]],
    pressure: &'a [f64],
}

impl FlowField {
    /// The all-zero field on `space`.
    pub fn zero(space: Arc<TaylorHood>) -> FlowField {
        FlowField {
            velocity: vec![[0.0; 2]; space.n_velocity_nodes()],
            pressure: vec![0.0; space.n_pressure_nodes()],
            space,
            lambda: 0.0,
            residual: 0.0,
            convection: ConvectionForm::Standard,
            stats: SolveStats::default(),
        }
    }

    /// Field with the given coefficients (not checked against any equation).
    pub fn from_parts(space: Arc<TaylorHood>, velocity: Vec<[f64; 2]>, pressure: Vec<f64>, lambda: f64) -> FlowField {
        assert_eq!(velocity.len(), space.n_velocity_nodes());
        assert_eq!(pressure.len(), space.n_pressure_nodes());
        FlowField { velocity, pressure, lambda, ..FlowField::zero(space) }
    }

    pub fn space(&self) -> &Arc<TaylorHood> {
        &self.space
    }

    pub fn mesh(&self) -> &Mesh {
        self.space.mesh()
    }

    /// `∫_Ω p`, exact for the P1 pressure.
    pub fn pressure_integral(&self) -> f64 {
        let m = self.mesh();
        m.triangles()
            .iter()
            .enumerate()
            .map(|(t, tri)| m.triangle_area(t) * tri.iter().map(|&v| self.pressure[v]).sum::<f64>() / 3.0)
            .sum()
    }

    /// `‖∫_Ω q ∇·u‖` over the pressure basis functions `q`.
    pub fn divergence_residual(&self) -> f64 {
        let mut r = vec![0.0; self.space.n_pressure_nodes()];
        for (t, el) in self.space.elements().iter().enumerate() {
            let geom = Geom::new(self.mesh().triangles()[t].map(|v| self.mesh().nodes()[v]));
            for (bary, wq) in TRI_QUAD {
                let d = p2_grads(bary, &geom);
                let div: f64 = (0..6).map(|k| self.velocity[el[k]][0] * d[k][0] + self.velocity[el[k]][1] * d[k][1]).sum();
                for j in 0..3 {
                    r[el[j]] += wq * geom.area * bary[j] * div;
                }
            }
        }
        r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Coefficient vector `[u1, u2, p]`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.velocity.iter().map(|v| v[0]).collect();
        x.extend(self.velocity.iter().map(|v| v[1]));
        x.extend_from_slice(&self.pressure);
        x
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_f64s(self.coefficients())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&FieldExport {
            mesh_ref: self.mesh().fingerprint(),
            lambda: self.lambda,
            residual: self.residual,
            velocity_nodes: self.space.nodes(),
            velocity: &self.velocity,
            pressure: &self.pressure,
        })
        .expect("field serializes")
    }

    /// Little-endian `f64` arrays: velocity (interleaved), then pressure.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (2 * self.velocity.len() + self.pressure.len()));
        for v in self.velocity.iter().flatten().chain(&self.pressure) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Structured log lines `{step, lambda, iteration, kind, residual}`.
    pub fn log_lines(&self) -> Vec<String> {
        self.stats.log.iter().map(|e| serde_json::to_string(e).expect("log serializes")).collect()
    }
}

/// `‖∇u‖_{L²(Ω)}`, integrated exactly on each element.
pub fn dirichlet_energy(f: &FlowField) -> f64 {
    let m = f.mesh();
    let mut s = 0.0;
    for (t, el) in f.space.elements().iter().enumerate() {
        let geom = Geom::new(m.triangles()[t].map(|v| m.nodes()[v]));
        for (bary, wq) in TRI_QUAD {
            let d = p2_grads(bary, &geom);
            let mut g = [[0.0; 2]; 2];
            for k in 0..6 {
                for a in 0..2 {
                    g[a][0] += f.velocity[el[k]][a] * d[k][0];
                    g[a][1] += f.velocity[el[k]][a] * d[k][1];
                }
            }
            s += wq * geom.area * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
    }
    s.sqrt()
}

/// Solve once on `mesh`. Use [`NsSolver`] to reuse the discretization for
/// several solves on the same mesh.
pub fn solve_steady_ns(mesh: &Mesh, bd: &BoundaryData, cfg: &SolverConfig) -> Result<FlowField, SolverError> {
    NsSolver::new(Arc::new(mesh.clone()), cfg.clone())?.solve(bd)
}

/// Where each velocity node takes its Dirichlet value from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NodeKind {
    Interior,
    Zero,
    Top,
    Inflow,
    Outflow,
}

/// Discretization, sparsity pattern and symbolic factorization of the
/// Jacobian for one mesh.
pub struct NsSolver {
    space: Arc<TaylorHood>,
    cfg: SolverConfig,
    geoms: Vec<Geom>,
    kinds: Vec<NodeKind>,
    /// Full unknown index -> free index (or `usize::MAX`).
    free: Vec<usize>,
    pattern: Pattern,
    symbolic: OnceLock<SymbolicLu<usize>>,
}

impl NsSolver {
    pub fn new(mesh: Arc<Mesh>, cfg: SolverConfig) -> Result<NsSolver, SolverError> {
        cfg.check()?;
        let space = Arc::new(TaylorHood::new(mesh));
        Ok(Self::with_space(space, cfg))
    }

    pub fn with_space(space: Arc<TaylorHood>, cfg: SolverConfig) -> NsSolver {
        let mesh = space.mesh().clone();
        let n2 = space.n_velocity_nodes();
        let mut kinds = vec![NodeKind::Interior; n2];
        // walls and body take precedence over the inflow/outflow sides at corners
        let rank = |k: NodeKind| match k {
            NodeKind::Interior => 0,
            NodeKind::Inflow | NodeKind::Outflow => 1,
            NodeKind::Zero | NodeKind::Top => 2,
        };
        for (i, e) in mesh.boundary().iter().enumerate() {
            let kind = match e.tag {
                BoundaryTag::GammaBottom | BoundaryTag::BodyBoundary => NodeKind::Zero,
                BoundaryTag::GammaTop => NodeKind::Top,
                BoundaryTag::GammaLeft => NodeKind::Inflow,
                BoundaryTag::GammaRight => NodeKind::Outflow,
            };
            for v in [e.edge[0], e.edge[1], space.boundary_midpoint(i)] {
                if rank(kind) > rank(kinds[v]) {
                    kinds[v] = kind;
                }
            }
        }
        let mut free = vec![usize::MAX; space.n_dofs()];
        let mut nf = 0;
        for a in 0..2 {
            for (v, k) in kinds.iter().enumerate() {
                if *k == NodeKind::Interior {
                    free[a * n2 + v] = nf;
                    nf += 1;
                }
            }
        }
        // pressure at vertex 0 is pinned
        for v in 1..space.n_pressure_nodes() {
            free[2 * n2 + v] = nf;
            nf += 1;
        }
        let geoms = mesh.triangles().iter().map(|t| Geom::new(t.map(|v| mesh.nodes()[v]))).collect();
        let pattern = Pattern::new(&space, &free);
        NsSolver { space, cfg, geoms, kinds, free, pattern, symbolic: OnceLock::new() }
    }

    pub fn space(&self) -> &Arc<TaylorHood> {
        &self.space
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space.mesh()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Number of unknowns in the linear systems.
    pub fn n_free(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    fn check_data(&self, bd: &BoundaryData) -> Result<(), SolverError> {
        bd.check()?;
        let (h, hm) = (bd.pair.half_height(), self.mesh().rect().half_height);
        if (h - hm).abs() > 1e-12 * hm {
            return Err(SolverError::DataMismatch(format!("profiles live on [-{h}, {h}], the channel has H = {hm}")));
        }
        Ok(())
    }

    /// First velocity component at every velocity node, for magnitude
    /// `lambda`. Outflow values carry a small interior correction that makes
    /// the discrete boundary flux vanish exactly.
    pub fn dirichlet_values(&self, bd: &BoundaryData) -> Vec<f64> {
        let h = bd.pair.half_height();
        let lam = bd.lambda;
        let nodes = self.space.nodes();
        let mut g: Vec<f64> = self
            .kinds
            .iter()
            .zip(nodes)
            .map(|(k, p)| match k {
                NodeKind::Interior | NodeKind::Zero => 0.0,
                NodeKind::Top => lam * bd.u() as f64,
                NodeKind::Inflow => lam * bd.pair.v_in.eval(p[1]),
                NodeKind::Outflow => lam * bd.pair.v_out.eval(p[1]),
            })
            .collect();
        let bump = |y: f64| 1.0 - (y / h) * (y / h);
        let (mut f_in, mut f_out, mut f_bump) = (0.0, 0.0, 0.0);
        let mesh = self.mesh();
        for (i, e) in mesh.boundary().iter().enumerate() {
            let [a, b] = e.edge;
            let m = self.space.boundary_midpoint(i);
            let len = (nodes[b][1] - nodes[a][1]).abs();
            let simpson = |f: &dyn Fn(usize) -> f64| len / 6.0 * (f(a) + 4.0 * f(m) + f(b));
            match e.tag {
                BoundaryTag::GammaLeft => f_in += simpson(&|v| g[v]),
                BoundaryTag::GammaRight => {
                    f_out += simpson(&|v| g[v]);
                    f_bump += simpson(&|v| if self.kinds[v] == NodeKind::Outflow { bump(nodes[v][1]) } else { 0.0 });
                }
                _ => {}
            }
        }
        if f_bump > 0.0 && f_in != f_out {
            let c = (f_in - f_out) / f_bump;
            for (v, k) in self.kinds.iter().enumerate() {
                if *k == NodeKind::Outflow {
                    g[v] += c * bump(nodes[v][1]);
                }
            }
        }
        g
    }

    fn apply_dirichlet(&self, x: &mut [f64], g: &[f64]) {
        let n2 = self.space.n_velocity_nodes();
        for (v, k) in self.kinds.iter().enumerate() {
            if *k != NodeKind::Interior {
                x[v] = g[v];
                x[n2 + v] = 0.0;
            }
        }
    }

    fn local(&self, el: &[usize; 6], x: &[f64]) -> [f64; NLOC] {
        std::array::from_fn(|r| x[global_dof(&self.space, el, r)])
    }

    /// Residual restricted to free unknowns.
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.pattern.n];
        for (e, el) in self.space.elements().iter().enumerate() {
            let xl = self.local(el, x);
            let mut res = [0.0; NLOC];
            element(&self.geoms[e], &xl, self.cfg.convection, Linearization::Newton, &mut res, None);
            for (k, v) in res.iter().enumerate() {
                let f = self.free[global_dof(&self.space, el, k)];
                if f != usize::MAX {
                    r[f] += v;
                }
            }
        }
        r
    }

    fn residual_norm(&self, x: &[f64]) -> f64 {
        norm(&self.residual(x))
    }

    /// Jacobian values (in pattern order) and residual at `x`.
    fn linearize(&self, x: &[f64], lin: Linearization) -> (Vec<f64>, Vec<f64>) {
        let mut vals = vec![0.0; self.pattern.nnz()];
        let mut r = vec![0.0; self.pattern.n];
        let mut jac = [0.0; NLOC * NLOC];
        for (e, el) in self.space.elements().iter().enumerate() {
            let xl = self.local(el, x);
            let mut res = [0.0; NLOC];
            jac.fill(0.0);
            element(&self.geoms[e], &xl, self.cfg.convection, lin, &mut res, Some(&mut jac));
            let slots = &self.pattern.slots[e * NLOC * NLOC..(e + 1) * NLOC * NLOC];
            for (s, v) in slots.iter().zip(&jac) {
                if *s != u32::MAX {
                    vals[*s as usize] += v;
                }
            }
            for (k, v) in res.iter().enumerate() {
                let f = self.free[global_dof(&self.space, el, k)];
                if f != usize::MAX {
                    r[f] += v;
                }
            }
        }
        (vals, r)
    }

    fn symbolic(&self) -> Result<&SymbolicLu<usize>, SolverError> {
        if let Some(s) = self.symbolic.get() {
            return Ok(s);
        }
        let sym = SymbolicLu::try_new(self.pattern_ref()).map_err(|e| SolverError::Singular(format!("{e:?}")))?;
        Ok(self.symbolic.get_or_init(|| sym))
    }

    fn pattern_ref(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.pattern.n, self.pattern.n, &self.pattern.col_ptr, None, &self.pattern.row_idx)
    }

    /// Solve `J d = -r` with the Jacobian values `vals`.
    fn linear_solve(&self, vals: &[f64], r: &[f64]) -> Result<Vec<f64>, SolverError> {
        let n = self.pattern.n;
        let mat = SparseColMatRef::new(self.pattern_ref(), vals);
        let lu = Lu::try_new_with_symbolic(self.symbolic()?.clone(), mat)
            .map_err(|e| SolverError::Singular(format!("{e:?}")))?;
        let rhs = faer::Col::<f64>::from_fn(n, |i| -r[i]);
        let d = lu.solve(&rhs);
        let d: Vec<f64> = (0..n).map(|i| d[i]).collect();
        // relative residual of the linear solve
        let mut ad = vec![0.0; n];
        for c in 0..n {
            for k in self.pattern.col_ptr[c]..self.pattern.col_ptr[c + 1] {
                ad[self.pattern.row_idx[k]] += vals[k] * d[c];
            }
        }
        let err = norm(&ad.iter().zip(r).map(|(a, b)| a + b).collect::<Vec<_>>());
        let scale = norm(r);
        if !d.iter().all(|v| v.is_finite()) || err > self.cfg.linear_tol * scale.max(f64::MIN_POSITIVE) {
            return Err(SolverError::Singular(format!("linear solve relative residual {:e}", err / scale)));
        }
        Ok(d)
    }

    fn add_free(&self, x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        for (i, f) in self.free.iter().enumerate() {
            if *f != usize::MAX {
                y[i] += alpha * d[*f];
            }
        }
        y
    }

    /// Newton iteration on `x` (Dirichlet values already imposed). Returns
    /// the final residual, or `Err(residual)` when it fails to converge.
    fn newton(&self, x: &mut Vec<f64>, step: usize, lambda: f64, stats: &mut SolveStats) -> Result<Result<f64, f64>, SolverError> {
        let tol = self.cfg.newton_tol;
        let mut r = self.residual_norm(x);
        stats.log.push(LogEntry { step, lambda, iteration: 0, kind: StepKind::Start, residual: r });
        let mut picard_left = 0;
        let mut picard_used = false;
        for it in 1..=self.cfg.max_newton_iters {
            if r <= tol {
                return Ok(Ok(r));
            }
            let kind = if picard_left > 0 { Linearization::Picard } else { Linearization::Newton };
            let (vals, res) = self.linearize(x, kind);
            let d = self.linear_solve(&vals, &res)?;
            let mut alpha = 1.0;
            let (mut trial, mut rt);
            loop {
                trial = self.add_free(x, &d, alpha);
                rt = self.residual_norm(&trial);
                if rt < r || alpha < 1.0 / 16.0 {
                    break;
                }
                alpha *= 0.5;
            }
            if !(rt < r) {
                // round-off floor reached
                if r <= 100.0 * tol {
                    return Ok(Ok(r));
                }
                if kind == Linearization::Newton && !picard_used && self.cfg.picard_iters > 0 {
                    picard_left = self.cfg.picard_iters;
                    picard_used = true;
                    continue;
                }
                return Ok(Err(r));
            }
            let prev = r;
            *x = trial;
            r = rt;
            match kind {
                Linearization::Newton => stats.newton_iterations += 1,
                Linearization::Picard => {
                    stats.picard_iterations += 1;
                    picard_left -= 1;
                }
            }
            let kind = if kind == Linearization::Newton { StepKind::Newton } else { StepKind::Picard };
            stats.log.push(LogEntry { step, lambda, iteration: it, kind, residual: r });
            if r > tol && r <= 100.0 * tol && r > 0.5 * prev {
                return Ok(Ok(r));
            }
        }
        if r <= tol {
            Ok(Ok(r))
        } else {
            Ok(Err(r))
        }
    }

    pub fn solve(&self, bd: &BoundaryData) -> Result<FlowField, SolverError> {
        self.solve_from(bd, None)
    }

    /// Solve with continuation in λ, starting from `guess` (or from rest).
    pub fn solve_from(&self, bd: &BoundaryData, guess: Option<&FlowField>) -> Result<FlowField, SolverError> {
        self.check_data(bd)?;
        let n = self.space.n_dofs();
        let (mut x, mut lam) = match guess {
            Some(g) if Arc::ptr_eq(g.space(), &self.space) || g.velocity.len() == self.space.n_velocity_nodes() => {
                (g.coefficients(), g.lambda)
            }
            _ => (vec![0.0; n], 0.0),
        };
        let target = bd.lambda;
        let mut stats = SolveStats::default();
        let mut h = (target - lam) / self.cfg.continuation_steps as f64;
        let mut halvings = 0;
        let mut step = 0;
        let mut last_residual;
        loop {
            let next = if (target - lam).abs() <= h.abs() * (1.0 + 1e-12) || h == 0.0 { target } else { lam + h };
            let mut trial = if lam != 0.0 {
                let s = next / lam;
                x.iter().map(|v| v * s).collect()
            } else {
                vec![0.0; n]
            };
            let data = BoundaryData { lambda: next, pair: bd.pair.clone() };
            self.apply_dirichlet(&mut trial, &self.dirichlet_values(&data));
            step += 1;
            match self.newton(&mut trial, step, next, &mut stats)? {
                Ok(r) => {
                    x = trial;
                    lam = next;
                    last_residual = r;
                    stats.continuation_steps += 1;
                    if next == target {
                        break;
                    }
                }
                Err(r) => {
                    stats.failed_steps += 1;
                    halvings += 1;
                    if halvings > self.cfg.max_step_halvings {
                        return Err(SolverError::Divergence { lambda: target, reached: lam, residual: r });
                    }
                    h *= 0.5;
                }
            }
        }
        let n2 = self.space.n_velocity_nodes();
        let mut field = FlowField {
            velocity: (0..n2).map(|v| [x[v], x[n2 + v]]).collect(),
            pressure: x[2 * n2..].to_vec(),
            space: self.space.clone(),
            lambda: target,
            residual: last_residual,
            convection: self.cfg.convection,
            stats,
        };
        let mean = field.pressure_integral() / self.mesh().area();
        for p in &mut field.pressure {
            *p -= mean;
        }
        Ok(field)
    }

    /// Residual norm of an arbitrary field under this solver's discretization
    /// (pressure constant removed by the pinning).
    pub fn residual_of(&self, f: &FlowField) -> f64 {
        self.residual_norm(&f.coefficients())
    }
}

/// Convection trilinear form `c(f, g, h)` in the chosen form, for velocity
/// fields given at the P2 nodes of `space`.
pub fn convection_trilinear(space: &TaylorHood, form: ConvectionForm, f: &[[f64; 2]], g: &[[f64; 2]], h: &[[f64; 2]]) -> f64 {
    let mesh = space.mesh();
    let mut s = 0.0;
    for (t, el) in space.elements().iter().enumerate() {
        let geom = Geom::new(mesh.triangles()[t].map(|v| mesh.nodes()[v]));
        for (bary, wq) in TRI_QUAD {
            let phi = element::p2_values(bary);
            let d = p2_grads(bary, &geom);
            let val = |w: &[[f64; 2]]| (0..6).fold([0.0; 2], |s, k| [s[0] + w[el[k]][0] * phi[k], s[1] + w[el[k]][1] * phi[k]]);
            // f·∇w, componentwise
            let adv = |fv: [f64; 2], w: &[[f64; 2]]| {
                (0..6).fold([0.0; 2], |s, k| {
                    let a = fv[0] * d[k][0] + fv[1] * d[k][1];
                    [s[0] + a * w[el[k]][0], s[1] + a * w[el[k]][1]]
                })
            };
            let (fv, gv, hv) = (val(f), val(g), val(h));
            let fg = adv(fv, g);
            let std_term = fg[0] * hv[0] + fg[1] * hv[1];
            let term = match form {
                ConvectionForm::Standard => std_term,
                ConvectionForm::Skew => {
                    let fh = adv(fv, h);
                    0.5 * (std_term - fh[0] * gv[0] - fh[1] * gv[1])
                }
            };
            s += wq * geom.area * term;
        }
    }
    s
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
