use std::f64::consts::PI;

use liftlab::flowshape::{baseline_profile, flux, renormalize_flux, FlowClassParams, FlowProfile, FlowShapePair};
use liftlab::geometry::{body_family, BodyClass, BodyShape, ConfinementBox, Rect, TrapeziumParams};
use liftlab::mesh::MeshOptions;
use liftlab::ns_solver::SolverConfig;
use liftlab::optim::NelderMead;
use liftlab::stability::{
    BolzanoConfig, FlowBasis, GammaConfig, LambdaGrid, PathShape, RootMethod, ShapeOptConfig, ShapeSpace,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub flow: FlowConfig,
    pub mesh: MeshOptions,
    pub solver: SolverConfig,
    pub curve: CurveConfig,
    pub zero_lift: ZeroLiftConfig,
    pub gamma: GammaSection,
    pub optimize: OptimizeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub rect: Rect,
    pub confinement: ConfinementBox,
    pub trapezium: TrapeziumParams,
    /// Member of the trapezium family used as the body.
    pub eps: f64,
    /// Explicit body vertices; replaces the family member when given.
    pub vertices: Option<Vec<[f64; 2]>>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            rect: Rect { half_width: 5.0, half_height: 1.0 },
            confinement: ConfinementBox { half_width: 2.0, half_height: 0.5 },
            trapezium: TrapeziumParams { l: 0.6, h: 0.15, gamma: 0.3 },
            eps: 0.0,
            vertices: None,
        }
    }
}

/// One boundary profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Poiseuille for `U = 0`, Couette for `U = 1`.
    Baseline,
    /// Baseline plus `amplitude * sin(wavenumber * π x / H)`, flux restored.
    Perturbed { amplitude: f64, wavenumber: f64 },
    /// Values on a uniform grid over `[-H, H]`.
    Nodes { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Norm budget `r` of the flow class.
    pub r: f64,
    /// Top wall speed flag `U` (0 or 1).
    pub u: u8,
    pub nodes: usize,
    pub inflow: ProfileSpec,
    pub outflow: ProfileSpec,
    /// Magnitude for `solve` and `zero-lift`.
    pub lambda: f64,
    /// Upper end of lift curves and of the γ supremum.
    pub lambda_max: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            r: 6.0,
            u: 0,
            nodes: liftlab::flowshape::DEFAULT_NODES,
            inflow: ProfileSpec::Baseline,
            outflow: ProfileSpec::Perturbed { amplitude: 0.3, wavenumber: 1.0 },
            lambda: 0.5,
            lambda_max: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// Equispaced samples on `[0, lambda_max]`.
    pub points: usize,
    pub warm_start: bool,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig { points: 17, warm_start: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroLiftConfig {
    pub max_solves: usize,
    pub method: RootMethod,
    pub path: PathShape,
    pub base_eps: f64,
}

impl Default for ZeroLiftConfig {
    fn default() -> Self {
        let d = BolzanoConfig::default();
        ZeroLiftConfig { max_solves: d.max_solves, method: d.method, path: PathShape::Diagonal, base_eps: d.base_eps }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaSection {
    pub basis: FlowBasis,
    pub grid: LambdaGrid,
    pub search: NelderMead,
    pub restarts: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GammaSection {
    fn default() -> Self {
        let d = GammaConfig::default();
        GammaSection { basis: d.basis, grid: d.grid, search: d.search, restarts: d.restarts, step: d.step, seed: d.seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Target area `α`; the area of the configured body when absent.
    pub alpha: Option<f64>,
    pub vertices: usize,
    pub generations: usize,
    pub offspring: usize,
    pub sigma: f64,
    pub seed: u64,
    pub max_projection_iters: usize,
    /// Search only these bodies instead of the polygon family.
    pub shapes: Option<Vec<Vec<[f64; 2]>>>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let d = ShapeOptConfig::default();
        OptimizeConfig {
            alpha: None,
            vertices: 8,
            generations: d.generations,
            offspring: d.offspring,
            sigma: d.sigma,
            seed: d.seed,
            max_projection_iters: d.max_projection_iters,
            shapes: None,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            geometry: GeometryConfig::default(),
            flow: FlowConfig::default(),
            mesh: MeshOptions::uniform(1.0 / 6.0),
            solver: SolverConfig::default(),
            curve: CurveConfig::default(),
            zero_lift: ZeroLiftConfig::default(),
            gamma: GammaSection::default(),
            optimize: OptimizeConfig::default(),
        }
    }
}

impl Config {
    /// Parse TOML, reporting every unknown key before any type error.
    pub fn from_toml(text: &str) -> Result<Config, Vec<String>> {
        let value: toml::Value = toml::from_str(text).map_err(|e| vec![e.to_string()])?;
        let reference = serde_json::to_value(Config::default()).expect("config serializes");
        let mut unknown = Vec::new();
        unknown_keys(&value, &reference, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(unknown.into_iter().map(|k| format!("{k}: unknown key")).collect());
        }
        toml::from_str(text).map_err(|e| vec![e.to_string()])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Every invalid value, as `key: reason`.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let g = &self.geometry;
        if let Err(e) = g.rect.check() {
            errs.push(format!("geometry.rect: {e}"));
        }
        if let Err(e) = g.trapezium.check() {
            errs.push(format!("geometry.trapezium: {e}"));
        }
        if !(0.0..=1.0).contains(&g.eps) {
            errs.push(format!("geometry.eps: {} is outside [0, 1]", g.eps));
        }
        if let Err(e) = self.body() {
            errs.push(format!("geometry: {e}"));
        }
        let f = &self.flow;
        if f.u > 1 {
            errs.push(format!("flow.u: must be 0 or 1, got {}", f.u));
        } else if let Err(e) = FlowClassParams::new(f.r, f.u, g.rect.half_height) {
            errs.push(format!("flow.r: {e}"));
        }
        if f.nodes < 3 {
            errs.push("flow.nodes: at least 3 nodes are needed".into());
        }
        if !(f.lambda >= 0.0 && f.lambda.is_finite()) {
            errs.push(format!("flow.lambda: {} must be finite and >= 0", f.lambda));
        }
        if !(f.lambda_max > 0.0 && f.lambda_max.is_finite()) {
            errs.push(format!("flow.lambda_max: {} must be positive", f.lambda_max));
        }
        if errs.iter().all(|e| !e.starts_with("flow")) {
            if let Err(e) = self.pair() {
                errs.push(format!("flow: {e}"));
            }
        }
        if !(self.mesh.h > 0.0 && self.mesh.h.is_finite()) {
            errs.push(format!("mesh.h: {} must be positive", self.mesh.h));
        }
        if let Err(e) = self.solver.check() {
            errs.push(format!("solver: {e}"));
        }
        if self.curve.points < 2 {
            errs.push("curve.points: at least 2 points are needed".into());
        }
        if !(0.0..=1.0).contains(&self.zero_lift.base_eps) {
            errs.push("zero_lift.base_eps: must lie in [0, 1]".into());
        }
        if self.gamma.basis.terms == 0 {
            errs.push("gamma.basis.terms: must be at least 1".into());
        }
        if self.optimize.vertices < 3 {
            errs.push("optimize.vertices: must be at least 3".into());
        }
        if let Err(e) = self.body_class() {
            errs.push(format!("optimize.alpha: {e}"));
        }
        errs
    }

    pub fn body(&self) -> Result<BodyShape, String> {
        match &self.geometry.vertices {
            Some(v) => BodyShape::new(v.clone()).map_err(|e| e.to_string()),
            None => body_family(self.geometry.eps, &self.geometry.trapezium).map_err(|e| e.to_string()),
        }
    }

    pub fn class(&self) -> Result<FlowClassParams, String> {
        FlowClassParams::new(self.flow.r, self.flow.u, self.geometry.rect.half_height).map_err(|e| e.to_string())
    }

    fn profile(&self, spec: &ProfileSpec) -> Result<FlowProfile, String> {
        let h = self.geometry.rect.half_height;
        let n = self.flow.nodes;
        let base = baseline_profile(self.flow.u, h, n).map_err(|e| e.to_string())?;
        match spec {
            ProfileSpec::Baseline => Ok(base),
            ProfileSpec::Perturbed { amplitude, wavenumber } => {
                let v = FlowProfile::sample(h, n, |x| base.eval(x) + amplitude * (wavenumber * PI * x / h).sin())
                    .map_err(|e| e.to_string())?;
                Ok(renormalize_flux(&v, flux(&base)))
            }
            ProfileSpec::Nodes { values } => FlowProfile::from_nodes(h, values.clone()).map_err(|e| e.to_string()),
        }
    }

    pub fn pair(&self) -> Result<FlowShapePair, String> {
        let pair = FlowShapePair::new(self.profile(&self.flow.inflow)?, self.profile(&self.flow.outflow)?, self.flow.u)
            .map_err(|e| e.to_string())?;
        Ok(pair)
    }

    pub fn body_class(&self) -> Result<BodyClass, String> {
        let alpha = match self.optimize.alpha {
            Some(a) => a,
            None => self.body()?.area(),
        };
        BodyClass::new(&self.geometry.rect, self.geometry.confinement, alpha).map_err(|e| e.to_string())
    }

    pub fn bolzano(&self) -> BolzanoConfig {
        BolzanoConfig {
            mesh: self.mesh.clone(),
            solver: self.solver.clone(),
            max_solves: self.zero_lift.max_solves,
            method: self.zero_lift.method,
            base_eps: self.zero_lift.base_eps,
        }
    }

    pub fn gamma(&self) -> GammaConfig {
        let g = &self.gamma;
        GammaConfig {
            basis: g.basis.clone(),
            grid: g.grid.clone(),
            search: g.search.clone(),
            restarts: g.restarts,
            step: g.step,
            seed: g.seed,
            solver: self.solver.clone(),
            mesh: self.mesh.clone(),
        }
    }

    pub fn shape_opt(&self) -> ShapeOptConfig {
        let o = &self.optimize;
        ShapeOptConfig {
            generations: o.generations,
            offspring: o.offspring,
            sigma: o.sigma,
            seed: o.seed,
            max_projection_iters: o.max_projection_iters,
            gamma: self.gamma(),
        }
    }

    pub fn shape_space(&self) -> Result<ShapeSpace, String> {
        match &self.optimize.shapes {
            Some(list) => {
                let shapes = list.iter().map(|v| BodyShape::new(v.clone()).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
                Ok(ShapeSpace::Discrete { shapes })
            }
            None => Ok(ShapeSpace::Polygon { vertices: self.optimize.vertices, initial: Some(self.body()?) }),
        }
    }
}

/// Keys of `value` with no counterpart in `reference`. Descends only where
/// the reference has a table; `null` marks optional fields that accept
/// anything of the right type.
fn unknown_keys(value: &toml::Value, reference: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    let (toml::Value::Table(t), serde_json::Value::Object(r)) = (value, reference) else {
        return;
    };
    // tagged enums are checked by serde itself
    if r.contains_key("kind") {
        return;
    }
    for (k, v) in t {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match r.get(k) {
            None => out.push(path),
            Some(rv) => unknown_keys(v, rv, &path, out),
        }
    }
}
