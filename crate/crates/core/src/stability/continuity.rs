use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{mesh_for_body, StabilityError};
use crate::flowshape::{flux, renormalize_flux, w1inf_norm, FlowProfile, FlowShapePair};
use crate::geometry::{BodyShape, Rect};
use crate::lift::{force_scale, lift_volume};
use crate::mesh::{morph_body, Mesh, MeshOptions};
use crate::ns_solver::{BoundaryData, NsSolver, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Outflow profile plus `size` times a unit `W^{1,∞}` zero-flux bump.
    Flow,
    /// Body translated upwards by `size`, which is also its Hausdorff distance.
    Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBase {
    pub rect: Rect,
    pub body: BodyShape,
    pub pair: FlowShapePair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityConfig {
    /// Magnitudes at which the lifts are compared; the difference is the max.
    pub lambdas: Vec<f64>,
    /// Final difference allowed, relative to the force scale at the largest λ.
    pub tolerance: f64,
    pub solver: SolverConfig,
    pub mesh: MeshOptions,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        ContinuityConfig {
            lambdas: vec![0.25, 0.5],
            tolerance: 0.05,
            solver: SolverConfig::default(),
            mesh: MeshOptions::uniform(1.0 / 6.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub size: f64,
    pub difference: Option<f64>,
    #[serde(default)]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityTable {
    pub kind: ProbeKind,
    pub base_lifts: Vec<f64>,
    pub force_scale: f64,
    pub rows: Vec<ContinuityRow>,
    /// `difference[i+1] / difference[i]`.
    pub ratios: Vec<f64>,
    pub monotone: bool,
    pub passed: bool,
}

impl ContinuityTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("size,difference,failure\n");
        for r in &self.rows {
            let d = r.difference.map_or(String::new(), |d| format!("{d:e}"));
            s.push_str(&format!("{:e},{},{}\n", r.size, d, r.failure.as_deref().unwrap_or("")));
        }
        s
    }
}

/// Lift differences between the base configuration and perturbations of the
/// given sizes, largest first.
pub fn continuity_probe(kind: ProbeKind, base: &ProbeBase, sizes: &[f64], cfg: &ContinuityConfig) -> Result<ContinuityTable, StabilityError> {
    if sizes.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(StabilityError::InvalidConfig("perturbation sizes must be finite and >= 0".into()));
    }
    if sizes.windows(2).any(|w| w[1] > w[0]) {
        return Err(StabilityError::InvalidConfig("perturbation sizes must be non-increasing".into()));
    }
    if cfg.lambdas.is_empty() || cfg.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(StabilityError::InvalidConfig("lambdas must be finite, >= 0 and non-empty".into()));
    }
    cfg.solver.check()?;
    let mesh = Arc::new(mesh_for_body(&base.rect, &base.body, &cfg.mesh)?);
    let lifts = |mesh: Arc<Mesh>, pair: &FlowShapePair| -> Result<Vec<f64>, StabilityError> {
        let solver = NsSolver::new(mesh, cfg.solver.clone())?;
        let mut prev = None;
        let mut out = Vec::with_capacity(cfg.lambdas.len());
        for &l in &cfg.lambdas {
            let f = solver.solve_from(&BoundaryData::new(l, pair.clone())?, prev.as_ref())?;
            out.push(lift_volume(&f)?);
            prev = Some(f);
        }
        Ok(out)
    };
    let base_lifts = lifts(mesh.clone(), &base.pair)?;
    let lmax = cfg.lambdas.iter().cloned().fold(0.0, f64::max);
    let scale = force_scale(&mesh, &base.pair, lmax);

    let bump = {
        let h = base.pair.half_height();
        let p = FlowProfile::sample(h, base.pair.v_out.len(), |x| (PI * x / h).sin())?;
        let n = w1inf_norm(&p);
        p.scaled(1.0 / n)
    };
    let perturbed = |size: f64| -> Result<Vec<f64>, StabilityError> {
        if size == 0.0 {
            return lifts(mesh.clone(), &base.pair);
        }
        match kind {
            ProbeKind::Flow => {
                // the sampled sum loses the exact flux of analytic profiles
                let v_out = renormalize_flux(&base.pair.v_out.add_scaled(size, &bump)?, flux(&base.pair.v_in));
                let pair = FlowShapePair::new(base.pair.v_in.clone(), v_out, base.pair.u)?;
                lifts(mesh.clone(), &pair)
            }
            ProbeKind::Body => {
                let from = base.body.vertices();
                let to: Vec<_> = from.iter().map(|p| [p[0], p[1] + size]).collect();
                let moved = morph_body(&mesh, from, &to)?;
                lifts(Arc::new(moved), &base.pair)
            }
        }
    };
    let results = crate::par_map(sizes, |&s| perturbed(s));
    let rows: Vec<ContinuityRow> = sizes
        .iter()
        .zip(results)
        .map(|(&size, r)| match r {
            Ok(l) => {
                let d = l.iter().zip(&base_lifts).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                ContinuityRow { size, difference: Some(d), failure: None }
            }
            Err(e) => ContinuityRow { size, difference: None, failure: Some(e.to_string()) },
        })
        .collect();
    let diffs: Option<Vec<f64>> = rows.iter().map(|r| r.difference).collect();
    let (ratios, monotone, passed) = match diffs {
        Some(d) => {
            let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
            let monotone = d.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0 && w[1] == 0.0);
            let last_ok = d.last().map_or(true, |&x| x <= cfg.tolerance * scale);
            (ratios, monotone, monotone && last_ok)
        }
        None => (Vec::new(), false, false),
    };
    Ok(ContinuityTable { kind, base_lifts, force_scale: scale, rows, ratios, monotone, passed })
}
