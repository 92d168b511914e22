use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mesh_for_body, StabilityError};
use crate::flowshape::{
    baseline_profile, grid_x, is_admissible_flow, renormalize_flux, FlowClassParams, FlowProfile, FlowShapePair,
    DEFAULT_NODES,
};
use crate::geometry::{BodyShape, Rect};
use crate::lift::{lift_volume, LiftCurve, LiftError};
use crate::mesh::{Mesh, MeshOptions};
use crate::ns_solver::{BoundaryData, FlowField, NsSolver, SolverConfig};
use crate::optim::{axis_simplex, minimize, NelderMead};

/// Finite-dimensional family of flow pairs in `F_{r,U}`.
///
/// Each profile is `V = V_base + Σ a_k e_k + Σ b_k o_k` with
/// `e_k(x) = cos((2k+1)πx/2H) - (-1)^k cos(πx/2H)/(2k+1)` (even, zero flux)
/// and `o_k(x) = sin(kπx/H)` (odd), all vanishing at `±H`, so endpoint values
/// and flux are those of the baseline profile. Coefficients are laid out as
/// `[a_in, b_in, a_out, b_out]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowBasis {
    /// Even and odd terms per profile.
    pub terms: usize,
    pub nodes: usize,
    /// Flip the sign of the odd coefficients, which reflects every pair.
    pub mirror: bool,
    /// Optimizer coordinate `relabel[j]` holds canonical coefficient `j`.
    pub relabel: Option<Vec<usize>>,
}

impl Default for FlowBasis {
    fn default() -> Self {
        FlowBasis { terms: 3, nodes: DEFAULT_NODES, mirror: false, relabel: None }
    }
}

impl FlowBasis {
    pub fn dim(&self) -> usize {
        4 * self.terms
    }

    pub fn check(&self) -> Result<(), StabilityError> {
        if self.terms == 0 {
            return Err(StabilityError::InvalidConfig("flow basis needs at least one term".into()));
        }
        if let Some(p) = &self.relabel {
            let mut seen = vec![false; self.dim()];
            if p.len() != self.dim() || p.iter().any(|&j| j >= self.dim() || std::mem::replace(&mut seen[j], true)) {
                return Err(StabilityError::InvalidConfig(format!("relabel must be a permutation of 0..{}", self.dim())));
            }
        }
        Ok(())
    }

    /// Canonical coefficients from optimizer coordinates.
    pub fn canonical(&self, y: &[f64]) -> Vec<f64> {
        match &self.relabel {
            Some(p) => (0..y.len()).map(|j| y[p[j]]).collect(),
            None => y.to_vec(),
        }
    }

    /// Optimizer coordinates from canonical coefficients.
    pub fn relabeled(&self, x: &[f64]) -> Vec<f64> {
        match &self.relabel {
            Some(p) => {
                let mut y = vec![0.0; x.len()];
                for j in 0..x.len() {
                    y[p[j]] = x[j];
                }
                y
            }
            None => x.to_vec(),
        }
    }

    fn profile(&self, base: &FlowProfile, even: &[f64], odd: &[f64], se: f64, so: f64) -> FlowProfile {
        let sign = if self.mirror { -1.0 } else { 1.0 };
        if even.iter().all(|a| a * se == 0.0) && odd.iter().all(|b| b * so == 0.0) {
            return base.clone();
        }
        let h = base.half_height();
        let n = base.len();
        let mut nodes = base.nodes().to_vec();
        for (i, v) in nodes.iter_mut().enumerate().take(n - 1).skip(1) {
            let x = grid_x(h, n, i);
            for k in 0..self.terms {
                let j = (2 * k + 1) as f64;
                let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
                let e = (j * PI * x / (2.0 * h)).cos() - alt * (PI * x / (2.0 * h)).cos() / j;
                let o = ((k + 1) as f64 * PI * x / h).sin();
                *v += se * even[k] * e + sign * so * odd[k] * o;
            }
        }
        renormalize_flux(&FlowProfile::from_nodes(h, nodes).expect("finite nodes"), 1.0)
    }

    fn raw_pair(&self, class: &FlowClassParams, half_height: f64, x: &[f64], se: f64, so: f64) -> FlowShapePair {
        let t = self.terms;
        let base = baseline_profile(class.u, half_height, self.nodes).expect("class was checked");
        let v_in = self.profile(&base, &x[..t], &x[t..2 * t], se, so);
        let v_out = self.profile(&base, &x[2 * t..3 * t], &x[3 * t..], se, so);
        FlowShapePair { v_in, v_out, u: class.u }
    }

    /// The admissible pair for optimizer coordinates `y`: the even part is
    /// shrunk towards the baseline until it fits the norm budget, then the
    /// odd part is shrunk until the whole pair fits.
    pub fn pair(&self, class: &FlowClassParams, half_height: f64, y: &[f64]) -> Result<FlowShapePair, StabilityError> {
        if y.len() != self.dim() {
            return Err(StabilityError::InvalidConfig(format!("expected {} coefficients, got {}", self.dim(), y.len())));
        }
        class.check(half_height).map_err(|e| StabilityError::InfeasibleClass(e.to_string()))?;
        let x = self.canonical(y);
        let norm = |se: f64, so: f64| self.raw_pair(class, half_height, &x, se, so).norm();
        let fits = |v: f64| v <= class.r;
        let largest = |f: &dyn Fn(f64) -> f64| -> f64 {
            if fits(f(1.0)) {
                return 1.0;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if fits(f(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let se = largest(&|s| norm(s, 0.0));
        let so = largest(&|s| norm(se, s));
        let pair = self.raw_pair(class, half_height, &x, se, so);
        let report = is_admissible_flow(&pair, class);
        if !report.admissible {
            return Err(StabilityError::InfeasibleClass(format!("projected pair violates {:?}", report.violations)));
        }
        Ok(pair)
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_json(self)
    }
}

/// Sampling of `[0, λ_max]` for the inner supremum: a uniform coarse grid,
/// then passes of `refine` points around the running maximum, each pass
/// zooming to the previous local spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaGrid {
    pub coarse: usize,
    pub passes: usize,
    pub refine: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid { coarse: 17, passes: 2, refine: 8 }
    }
}

struct Sample {
    lambda: f64,
    lift: f64,
    residual: f64,
    field: Option<FlowField>,
}

/// Lift curve on the adaptive grid of `[0, lambda_max]`. Coarse samples are
/// warm-started in order and a failure truncates them; refinement samples
/// start from the nearest solved field and failed ones are skipped.
pub fn adaptive_lift_curve(
    solver: &NsSolver,
    pair: &FlowShapePair,
    lambda_max: f64,
    grid: &LambdaGrid,
) -> Result<LiftCurve, LiftError> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(LiftError::InvalidGrid(format!("lambda_max = {lambda_max} must be positive")));
    }
    if grid.coarse < 2 {
        return Err(LiftError::InvalidGrid("the coarse grid needs at least 2 points".into()));
    }
    if solver.mesh().body().is_none() {
        return Err(LiftError::NoBody);
    }
    let mut samples = vec![Sample { lambda: 0.0, lift: 0.0, residual: 0.0, field: None }];
    let mut failure = None;
    let solve = |lambda: f64, guess: Option<&FlowField>| -> Result<(FlowField, f64), LiftError> {
        let f = solver.solve_from(&BoundaryData::new(lambda, pair.clone())?, guess)?;
        let l = lift_volume(&f)?;
        Ok((f, l))
    };
    let spacing = lambda_max / (grid.coarse - 1) as f64;
    for k in 1..grid.coarse {
        let lambda = if k == grid.coarse - 1 { lambda_max } else { spacing * k as f64 };
        let prev = samples.last().and_then(|s| s.field.as_ref());
        match solve(lambda, prev) {
            Ok((f, l)) => samples.push(Sample { lambda, lift: l, residual: f.residual, field: Some(f) }),
            Err(e) => {
                failure = Some(format!("lambda = {lambda}: {e}"));
                break;
            }
        }
    }
    let upper = samples.last().map_or(0.0, |s| s.lambda);
    let mut width = spacing;
    for _ in 0..grid.passes {
        if grid.refine == 0 || upper == 0.0 {
            break;
        }
        let centre = samples.iter().max_by(|a, b| a.lift.abs().total_cmp(&b.lift.abs())).map_or(0.0, |s| s.lambda);
        let step = 2.0 * width / (grid.refine + 1) as f64;
        for j in 1..=grid.refine {
            let lambda = centre - width + step * j as f64;
            if !(lambda > 0.0 && lambda <= upper) || samples.iter().any(|s| (s.lambda - lambda).abs() <= 1e-12 * lambda_max) {
                continue;
            }
            let nearest = samples
                .iter()
                .filter(|s| s.field.is_some())
                .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()));
            if let Ok((f, l)) = solve(lambda, nearest.and_then(|s| s.field.as_ref())) {
                samples.push(Sample { lambda, lift: l, residual: f.residual, field: Some(f) });
            }
        }
        samples.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        width = step;
    }
    samples.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(LiftCurve {
        lambdas: samples.iter().map(|s| s.lambda).collect(),
        lifts: samples.iter().map(|s| s.lift).collect(),
        residuals: samples.iter().map(|s| s.residual).collect(),
        mesh_id: solver.mesh().fingerprint(),
        flow_id: pair.fingerprint(),
        failure,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub basis: FlowBasis,
    pub grid: LambdaGrid,
    pub search: NelderMead,
    /// Nelder–Mead runs after the first, each from the best point so far
    /// with a randomly signed, halved simplex.
    pub restarts: usize,
    /// Initial simplex edge in coefficient units.
    pub step: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    pub mesh: MeshOptions,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            basis: FlowBasis::default(),
            grid: LambdaGrid::default(),
            search: NelderMead { max_evals: 60, f_tol: 1e-9, x_tol: 1e-4 },
            restarts: 2,
            step: 0.25,
            seed: 0,
            solver: SolverConfig::default(),
            mesh: MeshOptions::uniform(0.2),
        }
    }
}

/// One evaluated flow pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTraceEntry {
    pub eval: usize,
    /// Optimizer coordinates.
    pub coefficients: Vec<f64>,
    pub flow_id: String,
    /// Sup-norm of the lift curve of this pair.
    pub sup: f64,
    pub lambda: f64,
    pub lift: f64,
    pub samples: usize,
    #[serde(default)]
    pub failure: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    /// Lower bound for `γ_{r,U}(B)` over the parameterized pairs.
    pub value: f64,
    pub argmax_pair: FlowShapePair,
    pub argmax_coefficients: Vec<f64>,
    pub argmax_lambda: f64,
    pub argmax_lift: f64,
    /// Value of the first (baseline) evaluation.
    pub baseline_value: f64,
    pub evaluations: usize,
    pub trace: Vec<GammaTraceEntry>,
    pub mesh_id: String,
    pub solver_id: String,
    pub parameterization_id: String,
}

impl GammaEstimate {
    /// Trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|e| serde_json::to_string(e).expect("trace serializes") + "\n").collect()
    }
}

/// Mesh `R \ B` and estimate `γ_{r,U}(B)`.
pub fn gamma_estimate(
    rect: &Rect,
    body: &BodyShape,
    class: &FlowClassParams,
    lambda_max: f64,
    cfg: &GammaConfig,
) -> Result<GammaEstimate, StabilityError> {
    let mesh = mesh_for_body(rect, body, &cfg.mesh)?;
    gamma_estimate_on(&mesh, class, lambda_max, cfg)
}

/// Estimate `γ_{r,U}(B)` on a prepared mesh: Nelder–Mead with restarts over
/// [`FlowBasis`] coefficients, maximizing the sup-norm of
/// [`adaptive_lift_curve`]. The search starts at the baseline pair.
pub fn gamma_estimate_on(
    mesh: &Mesh,
    class: &FlowClassParams,
    lambda_max: f64,
    cfg: &GammaConfig,
) -> Result<GammaEstimate, StabilityError> {
    cfg.basis.check()?;
    let h = mesh.rect().half_height;
    class.check(h).map_err(|e| StabilityError::InfeasibleClass(e.to_string()))?;
    if mesh.body().is_none() {
        return Err(LiftError::NoBody.into());
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(StabilityError::InvalidConfig(format!("lambda_max = {lambda_max} must be positive")));
    }
    let solver = NsSolver::new(Arc::new(mesh.clone()), cfg.solver.clone())?;
    let dim = cfg.basis.dim();
    let mut trace: Vec<GammaTraceEntry> = Vec::new();
    let mut best: Option<(FlowShapePair, GammaTraceEntry)> = None;
    let objective = |y: &[f64]| -> f64 {
        let elapsed = crate::stopwatch();
        let eval = trace.len();
        let mut entry = GammaTraceEntry {
            eval,
            coefficients: y.to_vec(),
            flow_id: String::new(),
            sup: f64::NAN,
            lambda: 0.0,
            lift: 0.0,
            samples: 0,
            failure: None,
            seconds: 0.0,
        };
        let value = match cfg.basis.pair(class, h, y) {
            Ok(pair) => {
                entry.flow_id = pair.fingerprint();
                match adaptive_lift_curve(&solver, &pair, lambda_max, &cfg.grid) {
                    Ok(curve) => {
                        let i = curve.argmax();
                        entry.sup = curve.sup_norm();
                        entry.lambda = curve.lambdas[i];
                        entry.lift = curve.lifts[i];
                        entry.samples = curve.len();
                        entry.failure = curve.failure.clone();
                        if best.as_ref().map_or(true, |(_, b)| entry.sup > b.sup) {
                            best = Some((pair, entry.clone()));
                        }
                        -entry.sup
                    }
                    Err(e) => {
                        entry.failure = Some(e.to_string());
                        f64::NAN
                    }
                }
            }
            Err(e) => {
                entry.failure = Some(e.to_string());
                f64::NAN
            }
        };
        entry.seconds = elapsed();
        trace.push(entry);
        value
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut simplices = vec![axis_simplex(cfg.step, &vec![true; dim])];
    for k in 1..=cfg.restarts {
        let signs: Vec<bool> = (0..dim).map(|_| rng.gen()).collect();
        let step = cfg.step / f64::powi(2.0, k as i32);
        let dirs = axis_simplex(step, &signs).iter().map(|d| cfg.basis.relabeled(d)).collect();
        simplices.push(dirs);
    }
    simplices[0] = simplices[0].iter().map(|d| cfg.basis.relabeled(d)).collect();
    minimize(objective, &vec![0.0; dim], &simplices, &cfg.search);
    let baseline_value = trace.first().map_or(0.0, |e| e.sup);
    let Some((pair, entry)) = best else {
        let why = trace.first().and_then(|e| e.failure.clone()).unwrap_or_else(|| "no evaluations".into());
        return Err(StabilityError::InvalidConfig(format!("no flow pair could be evaluated: {why}")));
    };
    Ok(GammaEstimate {
        value: entry.sup,
        argmax_pair: pair,
        argmax_coefficients: entry.coefficients.clone(),
        argmax_lambda: entry.lambda,
        argmax_lift: entry.lift,
        baseline_value,
        evaluations: trace.len(),
        trace,
        mesh_id: mesh.fingerprint(),
        solver_id: crate::fingerprint_json(&cfg.solver),
        parameterization_id: cfg.basis.fingerprint(),
    })
}
