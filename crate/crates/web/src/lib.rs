//! Browser bindings for the liftlab demo page in `www/`.
//!
//! Each exported function takes plain numbers and returns a JSON string with
//! ready-to-insert SVG markup and a few summary numbers.

use std::f64::consts::PI;
use std::sync::Arc;

use liftlab::flowshape::{flow_homotopy, flux, renormalize_flux, FlowClassParams, FlowProfile, FlowShapePair};
use liftlab::geometry::{body_family, reflect_body, ConfinementBox, Rect, TrapeziumParams};
use liftlab::lift::lift_curve_on;
use liftlab::mesh::{mesh_quality, MeshOptions};
use liftlab::ns_solver::{NsSolver, SolverConfig};
use liftlab::plot;
use liftlab::stability::mesh_for_body;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const RECT: Rect = Rect { half_width: 5.0, half_height: 1.0 };
const BOX: ConfinementBox = ConfinementBox { half_width: 2.0, half_height: 0.5 };
const NODES: usize = 129;
/// Coarsest mesh the demo accepts; finer ones get slow in the browser.
pub const MIN_MESH_H: f64 = 0.08;

#[derive(Debug, Serialize)]
pub struct BodyScene {
    pub shapes_svg: String,
    pub mesh_svg: String,
    pub area: f64,
    pub vertices: Vec<[f64; 2]>,
    pub nodes: usize,
    pub triangles: usize,
    pub min_angle_deg: f64,
}

#[derive(Debug, Serialize)]
pub struct FlowScene {
    pub svg: String,
    pub norm: f64,
    pub flux_in: f64,
    pub flux_out: f64,
}

#[derive(Debug, Serialize)]
pub struct LiftScene {
    pub svg: String,
    pub lambdas: Vec<f64>,
    pub lifts: Vec<f64>,
    pub failure: Option<String>,
}

fn trapezium(l: f64, h: f64, gamma: f64) -> Result<TrapeziumParams, String> {
    let p = TrapeziumParams { l, h, gamma };
    p.check().map_err(|e| e.to_string())?;
    Ok(p)
}

fn mesh_options(h: f64) -> Result<MeshOptions, String> {
    if !(h >= MIN_MESH_H && h.is_finite()) {
        return Err(format!("mesh size {h} is below the demo limit {MIN_MESH_H}"));
    }
    Ok(MeshOptions::uniform(h))
}

/// Poiseuille inflow; outflow with an added `amplitude sin(k π x)`, deformed
/// along the flow homotopy to `delta`.
fn flow_pair(amplitude: f64, wavenumber: f64, delta: f64) -> Result<FlowShapePair, String> {
    let e = |e: liftlab::flowshape::FlowError| e.to_string();
    let base = FlowProfile::poiseuille(RECT.half_height, NODES).map_err(e)?;
    let out = FlowProfile::sample(RECT.half_height, NODES, |x| base.eval(x) + amplitude * (wavenumber * PI * x).sin())
        .map_err(e)?;
    let pair = FlowShapePair::new(base.clone(), renormalize_flux(&out, flux(&base)), 0).map_err(e)?;
    if pair.is_even() || delta == 0.0 {
        return Ok(pair);
    }
    let class = FlowClassParams::new(pair.norm().max(6.0), 0, RECT.half_height).map_err(e)?;
    flow_homotopy(&pair, delta, &class).map_err(e)
}

/// The family member at `eps` with both endpoints, and its mesh.
pub fn body_scene(eps: f64, l: f64, h: f64, gamma: f64, mesh_h: f64) -> Result<BodyScene, String> {
    let p = trapezium(l, h, gamma)?;
    let b = body_family(eps, &p).map_err(|e| e.to_string())?;
    let b0 = body_family(0.0, &p).map_err(|e| e.to_string())?;
    let b1 = reflect_body(&b0);
    let shapes_svg = plot::shapes_svg(None, Some(&BOX), &[("ε = 0", &b0), ("ε = 1", &b1), ("B(ε)", &b)]);
    let m = mesh_for_body(&RECT, &b, &mesh_options(mesh_h)?).map_err(|e| e.to_string())?;
    let q = mesh_quality(&m);
    Ok(BodyScene {
        shapes_svg,
        mesh_svg: plot::mesh_svg(&m),
        area: b.area(),
        vertices: b.vertices().to_vec(),
        nodes: q.nodes,
        triangles: q.triangles,
        min_angle_deg: q.min_angle_deg,
    })
}

pub fn flow_scene(amplitude: f64, wavenumber: f64, delta: f64) -> Result<FlowScene, String> {
    let pair = flow_pair(amplitude, wavenumber, delta)?;
    Ok(FlowScene { svg: plot::profile_svg(&pair), norm: pair.norm(), flux_in: flux(&pair.v_in), flux_out: flux(&pair.v_out) })
}

/// Lift of `B(eps)` under the flow pair at `delta`, on `points` equispaced
/// values of λ in `[0, lambda_max]`.
#[allow(clippy::too_many_arguments)]
pub fn lift_scene(
    eps: f64,
    l: f64,
    h: f64,
    gamma: f64,
    amplitude: f64,
    delta: f64,
    lambda_max: f64,
    points: usize,
    mesh_h: f64,
) -> Result<LiftScene, String> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) || !(2..=41).contains(&points) {
        return Err("need lambda_max > 0 and between 2 and 41 points".into());
    }
    let b = body_family(eps, &trapezium(l, h, gamma)?).map_err(|e| e.to_string())?;
    let m = mesh_for_body(&RECT, &b, &mesh_options(mesh_h)?).map_err(|e| e.to_string())?;
    let pair = flow_pair(amplitude, 1.0, delta)?;
    let solver = NsSolver::new(Arc::new(m), SolverConfig::default()).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..points).map(|i| lambda_max * i as f64 / (points - 1) as f64).collect();
    let c = lift_curve_on(&solver, &pair, &grid, true).map_err(|e| e.to_string())?;
    Ok(LiftScene {
        svg: plot::lift_curve_svg(&[("lift", &c)]),
        lambdas: c.lambdas.clone(),
        lifts: c.lifts.clone(),
        failure: c.failure.clone(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = bodyScene)]
pub fn body_scene_js(eps: f64, l: f64, h: f64, gamma: f64, mesh_h: f64) -> Result<String, JsError> {
    to_js(body_scene(eps, l, h, gamma, mesh_h))
}

#[wasm_bindgen(js_name = flowScene)]
pub fn flow_scene_js(amplitude: f64, wavenumber: f64, delta: f64) -> Result<String, JsError> {
    to_js(flow_scene(amplitude, wavenumber, delta))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = liftScene)]
pub fn lift_scene_js(
    eps: f64,
    l: f64,
    h: f64,
    gamma: f64,
    amplitude: f64,
    delta: f64,
    lambda_max: f64,
    points: usize,
    mesh_h: f64,
) -> Result<String, JsError> {
    to_js(lift_scene(eps, l, h, gamma, amplitude, delta, lambda_max, points, mesh_h))
}
