use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{mesh_for_body, StabilityError};
use crate::flowshape::{flow_homotopy, is_admissible_flow, FlowClassParams, FlowShapePair};
use crate::geometry::{body_family, body_family_raw, BodyShape, Point, Rect, TrapeziumParams};
use crate::lift::{force_scale, lift_volume};
use crate::mesh::{generate_mesh, morph_body, Mesh, MeshOptions};
use crate::ns_solver::{BoundaryData, NsSolver, SolverConfig};

/// How the body moves along the path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyPath {
    /// The area-preserving family `B_ε` from the trapezium to its mirror.
    Family { params: TrapeziumParams },
    /// A body that does not move.
    Fixed { body: BodyShape },
}

/// Map `t -> (ε(t), δ(t))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathShape {
    /// `ε = δ = t`.
    #[default]
    Diagonal,
    /// `ε = t`, `δ = 0`.
    BodyOnly,
    /// `ε = 0`, `δ = t`.
    FlowOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyPath {
    pub rect: Rect,
    pub body: BodyPath,
    /// Flow pair at `δ = 0`.
    pub pair: FlowShapePair,
    pub class: FlowClassParams,
    pub lambda: f64,
    #[serde(default)]
    pub shape: PathShape,
}

impl HomotopyPath {
    pub fn diagonal(rect: Rect, params: TrapeziumParams, pair: FlowShapePair, class: FlowClassParams, lambda: f64) -> Self {
        HomotopyPath { rect, body: BodyPath::Family { params }, pair, class, lambda, shape: PathShape::Diagonal }
    }

    pub fn check(&self) -> Result<(), StabilityError> {
        if self.pair.u != 0 || self.class.u != 0 {
            return Err(StabilityError::InvalidPath("the zero-lift search needs U = 0".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(StabilityError::InvalidPath(format!("lambda = {} must be finite and >= 0", self.lambda)));
        }
        let report = is_admissible_flow(&self.pair, &self.class);
        if !report.admissible {
            return Err(StabilityError::InvalidPath(format!("flow pair not admissible: {:?}", report.violations)));
        }
        if let BodyPath::Family { params } = &self.body {
            params.check_fits(&self.rect, None)?;
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        match self.shape {
            PathShape::Diagonal => (t, t),
            PathShape::BodyOnly => (t, 0.0),
            PathShape::FlowOnly => (0.0, t),
        }
    }

    pub fn body_at(&self, eps: f64) -> Result<BodyShape, StabilityError> {
        match &self.body {
            BodyPath::Family { params } => Ok(body_family(eps, params)?),
            BodyPath::Fixed { body } => Ok(body.clone()),
        }
    }

    /// Flow pair at `δ`; an even pair is its own mirror image and stays fixed.
    pub fn pair_at(&self, delta: f64) -> Result<FlowShapePair, StabilityError> {
        if self.pair.is_even() {
            return Ok(self.pair.clone());
        }
        Ok(flow_homotopy(&self.pair, delta, &self.class)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    /// Midpoint of the bracket; the bracket halves every step.
    #[default]
    Bisection,
    /// Regula falsi with the Illinois modification.
    Illinois,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BolzanoConfig {
    pub mesh: MeshOptions,
    pub solver: SolverConfig,
    /// Total solves, endpoints and the verification included.
    pub max_solves: usize,
    pub method: RootMethod,
    /// Family member the base mesh is generated for; other members are
    /// obtained by moving its body nodes.
    pub base_eps: f64,
}

impl Default for BolzanoConfig {
    fn default() -> Self {
        BolzanoConfig {
            mesh: MeshOptions::uniform(1.0 / 6.0),
            solver: SolverConfig::default(),
            max_solves: 25,
            method: RootMethod::Bisection,
            base_eps: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BolzanoStep {
    pub t: f64,
    pub eps: f64,
    pub delta: f64,
    pub lift: f64,
    /// Bracket after this step.
    pub bracket: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroLiftResult {
    pub t: f64,
    pub eps: f64,
    pub delta: f64,
    pub lift: f64,
    /// Lift from an independent solve at `(eps, delta)`.
    pub verified_lift: f64,
    pub endpoint_lifts: [f64; 2],
    pub lift_tol: f64,
    pub noise_floor: f64,
    pub force_scale: f64,
    pub solves: usize,
    pub steps: Vec<BolzanoStep>,
}

/// Meshes and solves along a path.
pub struct PathEvaluator {
    path: HomotopyPath,
    cfg: BolzanoConfig,
    base: Mesh,
    base_raw: Option<Vec<Point>>,
}

impl PathEvaluator {
    pub fn new(path: &HomotopyPath, cfg: &BolzanoConfig) -> Result<PathEvaluator, StabilityError> {
        path.check()?;
        cfg.solver.check()?;
        let (base, base_raw) = match &path.body {
            BodyPath::Family { params } => {
                if !(0.0..=1.0).contains(&cfg.base_eps) {
                    return Err(StabilityError::InvalidConfig(format!("base_eps = {} outside [0, 1]", cfg.base_eps)));
                }
                let body = body_family(cfg.base_eps, params)?;
                let mesh = generate_mesh(&path.rect, Some(&body), &cfg.mesh)?;
                (mesh, Some(body_family_raw(cfg.base_eps, params)?.to_vec()))
            }
            BodyPath::Fixed { body } => (mesh_for_body(&path.rect, body, &cfg.mesh)?, None),
        };
        Ok(PathEvaluator { path: path.clone(), cfg: cfg.clone(), base, base_raw })
    }

    pub fn base_mesh(&self) -> &Mesh {
        &self.base
    }

    pub fn mesh_at(&self, eps: f64) -> Result<Mesh, StabilityError> {
        match (&self.path.body, &self.base_raw) {
            (BodyPath::Family { params }, Some(from)) => {
                if eps == self.cfg.base_eps {
                    return Ok(self.base.clone());
                }
                Ok(morph_body(&self.base, from, &body_family_raw(eps, params)?)?)
            }
            _ => Ok(self.base.clone()),
        }
    }

    /// Fresh solve and volume lift at path parameter `t`.
    pub fn lift_at(&self, t: f64) -> Result<f64, StabilityError> {
        let (eps, delta) = self.path.at(t);
        let mesh = self.mesh_at(eps)?;
        let pair = self.path.pair_at(delta)?;
        let solver = NsSolver::new(Arc::new(mesh), self.cfg.solver.clone())?;
        let f = solver.solve(&BoundaryData::new(self.path.lambda, pair)?)?;
        Ok(lift_volume(&f)?)
    }

    /// Reference force for the path's magnitude.
    pub fn force_scale(&self) -> f64 {
        force_scale(&self.base, &self.path.pair, self.path.lambda)
    }
}

/// Bolzano search for `t` with `Φ(t) = L_{B_ε(t)}(u, p) = 0`.
pub fn zero_lift_search(path: &HomotopyPath, cfg: &BolzanoConfig) -> Result<ZeroLiftResult, StabilityError> {
    let ev = PathEvaluator::new(path, cfg)?;
    let scale = ev.force_scale();
    let newton_tol = cfg.solver.newton_tol;
    let noise_floor = (10.0 * newton_tol).max(1e-12 * scale);
    let lift_tol = (1e-6 * scale).max(10.0 * newton_tol);
    let (f0, f1) = (ev.lift_at(0.0)?, ev.lift_at(1.0)?);
    let mut solves = 2;
    if f0.abs() <= noise_floor || f1.abs() <= noise_floor {
        return Err(StabilityError::NoSignChange(format!(
            "lift at endpoints below noise floor ({f0:e}, {f1:e}; floor {noise_floor:e})"
        )));
    }
    if f0.signum() == f1.signum() {
        return Err(StabilityError::NoSignChange(format!("endpoint lifts have the same sign ({f0:e}, {f1:e})")));
    }
    let (mut a, mut fa, mut b, mut fb) = (0.0, f0, 1.0, f1);
    let mut steps = Vec::new();
    let mut side = 0i8;
    loop {
        // keep one solve for the verification
        if solves + 2 > cfg.max_solves {
            let best = steps.iter().map(|s: &BolzanoStep| s.lift.abs()).fold(f0.abs().min(f1.abs()), f64::min);
            return Err(StabilityError::NotConverged { solves, lift: best });
        }
        let t = match cfg.method {
            RootMethod::Bisection => 0.5 * (a + b),
            RootMethod::Illinois => {
                let t = (a * fb - b * fa) / (fb - fa);
                if t > a && t < b { t } else { 0.5 * (a + b) }
            }
        };
        let ft = ev.lift_at(t)?;
        solves += 1;
        if ft.signum() == fa.signum() {
            a = t;
            fa = ft;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            fb = ft;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        let (eps, delta) = path.at(t);
        steps.push(BolzanoStep { t, eps, delta, lift: ft, bracket: [a, b] });
        if ft.abs() <= lift_tol {
            let verified = PathEvaluator::new(path, cfg)?.lift_at(t)?;
            solves += 1;
            return Ok(ZeroLiftResult {
                t,
                eps,
                delta,
                lift: ft,
                verified_lift: verified,
                endpoint_lifts: [f0, f1],
                lift_tol,
                noise_floor,
                force_scale: scale,
                solves,
                steps,
            });
        }
    }
}
