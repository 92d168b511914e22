//! Empirical upper end of the range of flow magnitudes with a well-behaved
//! solution, and the embedding-constant proxy it compares against.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use super::element::{Geom, TRI_QUAD};
use super::{dirichlet_energy, BoundaryData, FlowField, NsSolver, SolverConfig};
use crate::flowshape::FlowShapePair;
use crate::geometry::Rect;
use crate::mesh::{generate_mesh, Mesh, MeshOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSearch {
    /// First probe.
    pub start: f64,
    /// Largest λ probed.
    pub cap: f64,
    /// Bisection steps after the first failed probe.
    pub bisection_steps: usize,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch { start: 0.25, cap: 64.0, bisection_steps: 6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaFlag {
    /// Every probe up to the cap passed.
    CapLimited,
    /// A passing and a failing probe bracket the returned value.
    Bracketed,
    /// Even the smallest probe failed; the bound comes from bisection
    /// towards zero.
    FailedAtStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaProbe {
    pub lambda: f64,
    pub converged: bool,
    /// `‖∇u‖ / S0` when the solve converged.
    pub ratio: Option<f64>,
}

impl LambdaProbe {
    pub fn passed(&self) -> bool {
        self.converged && self.ratio.is_some_and(|r| r < 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub lambda_max: f64,
    pub flag: LambdaFlag,
    pub sobolev_proxy: f64,
    pub probes: Vec<LambdaProbe>,
}

/// Largest λ on a doubling-then-bisecting schedule at which the solver
/// converges and `‖∇u‖ < S0(R)`.
pub fn estimate_lambda_max(mesh: &Mesh, pair: &FlowShapePair, cfg: &SolverConfig, search: &LambdaSearch) -> LambdaEstimate {
    let s0 = empty_rect_sobolev_proxy(mesh.rect());
    let solver = match NsSolver::new(Arc::new(mesh.clone()), cfg.clone()) {
        Ok(s) => s,
        Err(_) => {
            return LambdaEstimate { lambda_max: 0.0, flag: LambdaFlag::FailedAtStart, sobolev_proxy: s0, probes: vec![] }
        }
    };
    let mut probes = Vec::new();
    let mut warm: Option<FlowField> = None;
    let mut probe = |lambda: f64, warm: &mut Option<FlowField>| -> bool {
        let res = BoundaryData::new(lambda, pair.clone()).and_then(|bd| solver.solve_from(&bd, warm.as_ref()));
        let p = match res {
            Ok(f) => {
                let ratio = dirichlet_energy(&f) / s0;
                let p = LambdaProbe { lambda, converged: true, ratio: Some(ratio) };
                if p.passed() {
                    *warm = Some(f);
                }
                p
            }
            Err(_) => LambdaProbe { lambda, converged: false, ratio: None },
        };
        let ok = p.passed();
        probes.push(p);
        ok
    };
    let (mut lo, mut hi) = (0.0, f64::NAN);
    let mut lam = search.start.min(search.cap);
    loop {
        if probe(lam, &mut warm) {
            lo = lam;
            if lam >= search.cap {
                break;
            }
            lam = (2.0 * lam).min(search.cap);
        } else {
            hi = lam;
            break;
        }
    }
    if hi.is_nan() {
        return LambdaEstimate { lambda_max: lo, flag: LambdaFlag::CapLimited, sobolev_proxy: s0, probes };
    }
    for _ in 0..search.bisection_steps {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut warm) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flag = if probes[0].passed() { LambdaFlag::Bracketed } else { LambdaFlag::FailedAtStart };
    LambdaEstimate { lambda_max: lo, flag, sobolev_proxy: s0, probes }
}

fn proxy_cache() -> &'static Mutex<HashMap<(u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Coarse P1 estimate of `S0(R) = min ‖∇w‖² / ‖w‖²_{L⁴}` over `H¹₀(R)`,
/// cached per rectangle.
pub fn empty_rect_sobolev_proxy(rect: &Rect) -> f64 {
    let key = (rect.half_width.to_bits(), rect.half_height.to_bits());
    if let Some(v) = proxy_cache().lock().expect("proxy cache").get(&key) {
        return *v;
    }
    let v = sobolev_quotient_min(rect, rect.half_height / 8.0);
    proxy_cache().lock().expect("proxy cache").insert(key, v);
    v
}

/// Inverse iteration `-Δw_{k+1} = w_k³` with L⁴ normalization; returns the
/// smallest quotient seen.
pub(crate) fn sobolev_quotient_min(rect: &Rect, h: f64) -> f64 {
    let mesh = generate_mesh(rect, None, &MeshOptions::uniform(h)).expect("empty rectangle meshes");
    let n = mesh.nodes().len();
    let mut fixed = vec![false; n];
    for e in mesh.boundary() {
        fixed[e.edge[0]] = true;
        fixed[e.edge[1]] = true;
    }
    let mut idx = vec![usize::MAX; n];
    let mut nf = 0;
    for v in 0..n {
        if !fixed[v] {
            idx[v] = nf;
            nf += 1;
        }
    }
    let geoms: Vec<Geom> = mesh.triangles().iter().map(|t| Geom::new(t.map(|v| mesh.nodes()[v]))).collect();
    let mut trip = Vec::new();
    for (t, g) in mesh.triangles().iter().zip(&geoms) {
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (idx[t[i]], idx[t[j]]);
                if a != usize::MAX && b != usize::MAX {
                    let k = g.area * (g.grad_l[i][0] * g.grad_l[j][0] + g.grad_l[i][1] * g.grad_l[j][1]);
                    trip.push(Triplet::new(a, b, k));
                }
            }
        }
    }
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trip).expect("stiffness");
    let lu = k.sp_lu().expect("Laplacian factorizes");
    let (l, hh) = (rect.half_width, rect.half_height);
    let mut w: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| {
            (std::f64::consts::FRAC_PI_2 * p[0] / l).cos().max(0.0) * (std::f64::consts::FRAC_PI_2 * p[1] / hh).cos().max(0.0)
        })
        .collect();
    for v in 0..n {
        if fixed[v] {
            w[v] = 0.0;
        }
    }
    let quotient = |w: &[f64]| -> f64 {
        let (mut grad2, mut l4) = (0.0, 0.0);
        for (t, g) in mesh.triangles().iter().zip(&geoms) {
            let gw = (0..3).fold([0.0; 2], |s, i| [s[0] + w[t[i]] * g.grad_l[i][0], s[1] + w[t[i]] * g.grad_l[i][1]]);
            grad2 += g.area * (gw[0] * gw[0] + gw[1] * gw[1]);
            for (bary, wq) in TRI_QUAD {
                let val: f64 = (0..3).map(|i| bary[i] * w[t[i]]).sum();
                l4 += wq * g.area * val.powi(4);
            }
        }
        grad2 / l4.sqrt()
    };
    let mut best = quotient(&w);
    for _ in 0..200 {
        let mut rhs = vec![0.0; nf];
        for (t, g) in mesh.triangles().iter().zip(&geoms) {
            for (bary, wq) in TRI_QUAD {
                let val: f64 = (0..3).map(|i| bary[i] * w[t[i]]).sum();
                for i in 0..3 {
                    if idx[t[i]] != usize::MAX {
                        rhs[idx[t[i]]] += wq * g.area * val.powi(3) * bary[i];
                    }
                }
            }
        }
        let b = faer::Col::<f64>::from_fn(nf, |i| rhs[i]);
        let x = lu.solve(&b);
        let mut next = vec![0.0; n];
        for v in 0..n {
            if idx[v] != usize::MAX {
                next[v] = x[idx[v]];
            }
        }
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        next.iter_mut().for_each(|v| *v /= scale);
        let q = quotient(&next);
        w = next;
        let done = (best - q).abs() <= 1e-10 * best;
        best = best.min(q);
        if done {
            break;
        }
    }
    best
}
