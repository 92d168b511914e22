//! Inflow/outflow profiles on `[-H, H]`, the admissible class `F_{r,U}`, the
//! even/odd calculus and the homotopy that deforms a flow pair into its mirror
//! image while keeping every intermediate pair admissible and non-even.
//!
//! A [`FlowProfile`] is a piecewise-linear function on a uniform grid. Node
//! `i` sits at `x_i = H (2i - (N-1)) / (N-1)`, so `x_{N-1-i} = -x_i` holds
//! exactly in floating point and the grid is always symmetric about 0.
//! Profiles built from an analytic quadratic (Poiseuille, Couette) remember it
//! and evaluate norms and fluxes exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_NODES: usize = 129;
pub const MIN_NODES: usize = 33;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("profile needs at least {MIN_NODES} nodes (got {0})")]
    TooFewNodes(usize),
    #[error("profile has non-finite node values")]
    NonFinite,
    #[error("half height must be positive (got {0})")]
    InvalidHalfHeight(f64),
    #[error("profiles live on different grids")]
    GridMismatch,
    #[error("U must be 0 or 1 (got {0})")]
    InvalidU(u8),
    #[error("invalid flow class: {0}")]
    InvalidClass(String),
    #[error("profile is not odd: antisymmetry defect {0:e}")]
    NotOdd(f64),
    #[error("odd part is identically zero")]
    IdenticallyZeroOddPart,
    #[error("homotopy parameter delta = {0} outside [0, 1]")]
    DeltaOutOfRange(f64),
    #[error("reflection requires U = 0 (the top-wall condition V(H) = U breaks otherwise)")]
    ReflectionNeedsUZero,
    #[error("flow pair is not admissible: {0:?}")]
    NotAdmissible(Vec<FlowViolation>),
}

/// `c0 + c1 x + c2 x^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x
    }

    fn sup_on(&self, h: f64) -> f64 {
        let mut m = self.eval(-h).abs().max(self.eval(h).abs());
        if self.c2 != 0.0 {
            let xv = -self.c1 / (2.0 * self.c2);
            if xv.abs() < h {
                m = m.max(self.eval(xv).abs());
            }
        }
        m
    }

    fn integral_on(&self, h: f64) -> f64 {
        2.0 * self.c0 * h + 2.0 * self.c2 * h * h * h / 3.0
    }
}

/// Piecewise-linear profile on a uniform symmetric grid of `[-H, H]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowProfile {
    #[serde(rename = "H")]
    half_height: f64,
    nodes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<Quadratic>,
}

impl FlowProfile {
    pub fn from_nodes(half_height: f64, nodes: Vec<f64>) -> Result<Self, FlowError> {
        if !(half_height > 0.0 && half_height.is_finite()) {
            return Err(FlowError::InvalidHalfHeight(half_height));
        }
        if nodes.len() < MIN_NODES {
            return Err(FlowError::TooFewNodes(nodes.len()));
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::NonFinite);
        }
        Ok(FlowProfile { half_height, nodes, exact: None })
    }

    /// Sample `f` at the grid nodes.
    pub fn sample(half_height: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, FlowError> {
        let nodes = (0..n).map(|i| f(grid_x(half_height, n, i))).collect();
        Self::from_nodes(half_height, nodes)
    }

    pub fn from_quadratic(half_height: f64, n: usize, q: Quadratic) -> Result<Self, FlowError> {
        let mut p = Self::sample(half_height, n, |x| q.eval(x))?;
        p.exact = Some(q);
        Ok(p)
    }

    pub fn zero(half_height: f64, n: usize) -> Result<Self, FlowError> {
        Self::from_quadratic(half_height, n, Quadratic { c0: 0.0, c1: 0.0, c2: 0.0 })
    }

    /// Unit-flux parabola `3 (H^2 - x^2) / (4 H^3)`.
    pub fn poiseuille(half_height: f64, n: usize) -> Result<Self, FlowError> {
        let h = half_height;
        let a = 3.0 / (4.0 * h * h * h);
        Self::from_quadratic(h, n, Quadratic { c0: a * h * h, c1: 0.0, c2: -a })
    }

    /// Shear profile `(x + H) / (2H)` with the quadratic correction
    /// `c (H^2 - x^2)`, `c = 3(1 - H)/(4 H^3)`, that makes the flux exactly 1.
    pub fn couette(half_height: f64, n: usize) -> Result<Self, FlowError> {
        let h = half_height;
        let c = 3.0 * (1.0 - h) / (4.0 * h * h * h);
        Self::from_quadratic(h, n, Quadratic { c0: 0.5 + c * h * h, c1: 0.5 / h, c2: -c })
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn exact(&self) -> Option<&Quadratic> {
        self.exact.as_ref()
    }

    pub fn x(&self, i: usize) -> f64 {
        grid_x(self.half_height, self.nodes.len(), i)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_height / (self.nodes.len() - 1) as f64
    }

    /// Value at `x` (clamped to `[-H, H]`): the analytic form if known, else
    /// the piecewise-linear interpolant.
    pub fn eval(&self, x: f64) -> f64 {
        if let Some(q) = &self.exact {
            return q.eval(x.clamp(-self.half_height, self.half_height));
        }
        self.interpolate(x)
    }

    /// Piecewise-linear interpolant of the node values.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let s = ((x + self.half_height) / self.spacing()).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        (1.0 - t) * self.nodes[i] + t * self.nodes[i + 1]
    }

    fn with_nodes(&self, nodes: Vec<f64>) -> FlowProfile {
        FlowProfile { half_height: self.half_height, nodes, exact: None }
    }

    fn same_grid(&self, other: &FlowProfile) -> bool {
        self.half_height == other.half_height && self.nodes.len() == other.nodes.len()
    }

    pub fn add_scaled(&self, s: f64, other: &FlowProfile) -> Result<FlowProfile, FlowError> {
        if !self.same_grid(other) {
            return Err(FlowError::GridMismatch);
        }
        let exact = match (self.exact, other.exact) {
            (Some(a), Some(b)) => Some(Quadratic { c0: a.c0 + s * b.c0, c1: a.c1 + s * b.c1, c2: a.c2 + s * b.c2 }),
            _ => None,
        };
        let nodes = self.nodes.iter().zip(&other.nodes).map(|(a, b)| a + s * b).collect();
        Ok(FlowProfile { half_height: self.half_height, nodes, exact })
    }

    pub fn scaled(&self, s: f64) -> FlowProfile {
        FlowProfile {
            half_height: self.half_height,
            nodes: self.nodes.iter().map(|v| s * v).collect(),
            exact: self.exact.map(|q| Quadratic { c0: s * q.c0, c1: s * q.c1, c2: s * q.c2 }),
        }
    }

    /// `V(-x)`: node values reversed.
    pub fn reflected(&self) -> FlowProfile {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        FlowProfile {
            half_height: self.half_height,
            nodes,
            exact: self.exact.map(|q| Quadratic { c1: -q.c1, ..q }),
        }
    }

    /// Largest absolute node value.
    pub fn max_abs(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute segment slope.
    pub fn max_slope(&self) -> f64 {
        let dx = self.spacing();
        self.nodes.windows(2).fold(0.0, |m, w| m.max(((w[1] - w[0]) / dx).abs()))
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_f64s(std::iter::once(self.half_height).chain(self.nodes.iter().copied()))
    }
}

/// `x_i` on the uniform grid of `n` nodes over `[-h, h]`, exactly antisymmetric.
pub fn grid_x(h: f64, n: usize, i: usize) -> f64 {
    let m = (n - 1) as f64;
    h * (2.0 * i as f64 - m) / m
}

/// `W^{1,inf}` norm: sup of the values plus sup of the slope.
pub fn w1inf_norm(v: &FlowProfile) -> f64 {
    match &v.exact {
        Some(q) => {
            let h = v.half_height;
            q.sup_on(h) + q.slope(-h).abs().max(q.slope(h).abs())
        }
        None => v.max_abs() + v.max_slope(),
    }
}

/// Integral over `[-H, H]`; exact for the stored representation.
pub fn flux(v: &FlowProfile) -> f64 {
    match &v.exact {
        Some(q) => q.integral_on(v.half_height),
        None => {
            let n = v.nodes.len();
            let inner: f64 = v.nodes[1..n - 1].iter().sum();
            v.spacing() * (inner + 0.5 * (v.nodes[0] + v.nodes[n - 1]))
        }
    }
}

/// Rescale the flux to exactly `target` without touching the endpoint values:
/// adds a multiple of the discrete hat-sum bump that vanishes at both ends.
pub fn renormalize_flux(v: &FlowProfile, target: f64) -> FlowProfile {
    let n = v.nodes.len();
    let defect = target - flux(v);
    let bump_flux = v.spacing() * (n - 2) as f64;
    let mut nodes = v.nodes.clone();
    for x in &mut nodes[1..n - 1] {
        *x += defect / bump_flux;
    }
    v.with_nodes(nodes)
}

/// `(V_e, V_o)` with `V_e(x) = (V(x)+V(-x))/2` and `V_o(x) = (V(x)-V(-x))/2`.
pub fn even_odd_split(v: &FlowProfile) -> (FlowProfile, FlowProfile) {
    let n = v.nodes.len();
    let mut e = Vec::with_capacity(n);
    let mut o = Vec::with_capacity(n);
    for i in 0..n {
        let a = v.nodes[i];
        let b = v.nodes[n - 1 - i];
        e.push(0.5 * (a + b));
        o.push(0.5 * (a - b));
    }
    let (mut ve, mut vo) = (v.with_nodes(e), v.with_nodes(o));
    if let Some(q) = v.exact {
        ve.exact = Some(Quadratic { c1: 0.0, ..q });
        vo.exact = Some(Quadratic { c0: 0.0, c1: q.c1, c2: 0.0 });
    }
    (ve, vo)
}

/// Sign changes of an odd profile, as a symmetric list including 0.
///
/// Node values within `1e-12 * max|V_o|` of zero count as zeros; a run of such
/// nodes is reported at its midpoint.
pub fn find_odd_zeros(vo: &FlowProfile) -> Result<Vec<f64>, FlowError> {
    let n = vo.nodes.len();
    let scale = vo.max_abs();
    let defect = (0..n).map(|i| (vo.nodes[i] + vo.nodes[n - 1 - i]).abs()).fold(0.0, f64::max);
    if defect > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(FlowError::NotOdd(defect));
    }
    if scale == 0.0 {
        return Err(FlowError::IdenticallyZeroOddPart);
    }
    let tol = 1e-12 * scale;
    let sign = |v: f64| if v.abs() <= tol { 0 } else if v > 0.0 { 1 } else { -1 };
    let mut zeros = Vec::new();
    // scan the open interval, skipping the fixed endpoint zeros
    let mut last_sign = 0;
    let mut last_idx = 0usize;
    let mut run_start: Option<usize> = None;
    for i in 0..n {
        let s = sign(vo.nodes[i]);
        if s == 0 {
            if run_start.is_none() {
                run_start = Some(i);
            }
            continue;
        }
        if let Some(r) = run_start.take() {
            // a run of zeros inside (0, n-1) separating two non-zero stretches
            if r > 0 && last_sign != 0 && last_sign != s {
                zeros.push(0.5 * (vo.x(r) + vo.x(i - 1)));
            }
        } else if last_sign != 0 && last_sign != s {
            let (a, b) = (vo.nodes[last_idx], vo.nodes[i]);
            let (xa, xb) = (vo.x(last_idx), vo.x(i));
            zeros.push(xa + (xb - xa) * a / (a - b));
        }
        last_sign = s;
        last_idx = i;
    }
    // symmetrize: keep the non-negative zeros and mirror them
    let mut pos: Vec<f64> = zeros.iter().copied().filter(|&z| z > 0.0).collect();
    pos.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out: Vec<f64> = pos.iter().rev().map(|z| -z).collect();
    out.push(0.0);
    out.extend(pos);
    Ok(out)
}

/// Admissible flow-shape class `F_{r,U}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowClassParams {
    pub r: f64,
    #[serde(rename = "U")]
    pub u: u8,
    #[serde(default = "default_flux_tol")]
    pub flux_tol: f64,
}

fn default_flux_tol() -> f64 {
    1e-9
}

impl FlowClassParams {
    /// Validates that `r` admits the unit-flux baseline pair on `[-h, h]`
    /// (Poiseuille for `U = 0`, corrected Couette for `U = 1`).
    pub fn new(r: f64, u: u8, half_height: f64) -> Result<Self, FlowError> {
        let c = FlowClassParams { r, u, flux_tol: default_flux_tol() };
        c.check(half_height)?;
        Ok(c)
    }

    pub fn check(&self, half_height: f64) -> Result<(), FlowError> {
        if self.u > 1 {
            return Err(FlowError::InvalidU(self.u));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(FlowError::InvalidClass(format!("r = {} must be positive", self.r)));
        }
        let base = baseline_profile(self.u, half_height, DEFAULT_NODES)?;
        let need = 2.0 * w1inf_norm(&base);
        if self.r < need * (1.0 - NORM_SLACK) {
            return Err(FlowError::InvalidClass(format!(
                "r = {} is below the baseline pair norm {need}",
                self.r
            )));
        }
        Ok(())
    }

    pub fn baseline_pair(&self, half_height: f64, n: usize) -> Result<FlowShapePair, FlowError> {
        let p = baseline_profile(self.u, half_height, n)?;
        FlowShapePair::new(p.clone(), p, self.u)
    }
}

/// Poiseuille for `U = 0`, Couette for `U = 1`.
pub fn baseline_profile(u: u8, half_height: f64, n: usize) -> Result<FlowProfile, FlowError> {
    match u {
        0 => FlowProfile::poiseuille(half_height, n),
        1 => FlowProfile::couette(half_height, n),
        _ => Err(FlowError::InvalidU(u)),
    }
}

const NORM_SLACK: f64 = 1e-12;

/// Inflow/outflow pair with top-wall velocity flag `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowShapePair {
    pub v_in: FlowProfile,
    pub v_out: FlowProfile,
    #[serde(rename = "U")]
    pub u: u8,
}

impl FlowShapePair {
    pub fn new(v_in: FlowProfile, v_out: FlowProfile, u: u8) -> Result<Self, FlowError> {
        if u > 1 {
            return Err(FlowError::InvalidU(u));
        }
        if v_in.half_height != v_out.half_height {
            return Err(FlowError::GridMismatch);
        }
        Ok(FlowShapePair { v_in, v_out, u })
    }

    pub fn half_height(&self) -> f64 {
        self.v_in.half_height
    }

    /// Sum of the two profile norms, the quantity bounded by `r`.
    pub fn norm(&self) -> f64 {
        w1inf_norm(&self.v_in) + w1inf_norm(&self.v_out)
    }

    pub fn is_even(&self) -> bool {
        let (_, a) = even_odd_split(&self.v_in);
        let (_, b) = even_odd_split(&self.v_out);
        a.max_abs() == 0.0 && b.max_abs() == 0.0
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_f64s(
            [self.u as f64, self.v_in.half_height]
                .into_iter()
                .chain(self.v_in.nodes.iter().copied())
                .chain(self.v_out.nodes.iter().copied()),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inflow,
    Outflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowViolation {
    NormExceeded { norm: f64, r: f64 },
    Endpoint { side: Side, at_top: bool, value: f64, expected: f64 },
    Flux { side: Side, value: f64 },
    UMismatch { pair: u8, class: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub admissible: bool,
    pub violations: Vec<FlowViolation>,
}

/// Check the norm bound, endpoint values and unit flux of `F_{r,U}`.
pub fn is_admissible_flow(p: &FlowShapePair, c: &FlowClassParams) -> FlowReport {
    let mut violations = Vec::new();
    if p.u != c.u {
        violations.push(FlowViolation::UMismatch { pair: p.u, class: c.u });
    }
    let norm = p.norm();
    if norm > c.r * (1.0 + NORM_SLACK) {
        violations.push(FlowViolation::NormExceeded { norm, r: c.r });
    }
    for (side, v) in [(Side::Inflow, &p.v_in), (Side::Outflow, &p.v_out)] {
        let n = v.nodes.len();
        let scale = v.max_abs().max(1.0);
        let ends = [(false, v.nodes[0], 0.0), (true, v.nodes[n - 1], c.u as f64)];
        for (at_top, value, expected) in ends {
            if (value - expected).abs() > 1e-12 * scale {
                violations.push(FlowViolation::Endpoint { side, at_top, value, expected });
            }
        }
        let f = flux(v);
        if (f - 1.0).abs() > c.flux_tol {
            violations.push(FlowViolation::Flux { side, value: f });
        }
    }
    FlowReport { admissible: violations.is_empty(), violations }
}

/// Mirror pair `(V_in(-x), V_out(-x))`. Only meaningful for `U = 0`.
pub fn reflect_flow(p: &FlowShapePair) -> Result<FlowShapePair, FlowError> {
    if p.u != 0 {
        return Err(FlowError::ReflectionNeedsUZero);
    }
    Ok(FlowShapePair { v_in: p.v_in.reflected(), v_out: p.v_out.reflected(), u: 0 })
}

/// Half-width fraction used to create the outer zero pair when the odd part
/// only vanishes at the origin.
pub const PINCH_FRACTION: f64 = 0.5;

/// Multiplier `m_i(delta)` applied to the odd part at each node, so that the
/// deformed profile is `V_e + m V_o`.
fn odd_multiplier(vo: &FlowProfile, delta: f64) -> Result<Vec<f64>, FlowError> {
    let zeros = find_odd_zeros(vo)?;
    let h = vo.half_height;
    let n = vo.nodes.len();
    let xs: Vec<f64> = (0..n).map(|i| vo.x(i)).collect();
    // the two-branch coefficient with sign flip outside / inside x*
    let two_branch = |x: f64, xstar: f64, d: f64| -> f64 {
        let outer = x.abs() >= xstar;
        if d <= 0.5 {
            if outer { 1.0 - 4.0 * d } else { 1.0 }
        } else if outer {
            -1.0
        } else {
            3.0 - 4.0 * d
        }
    };
    if zeros.len() >= 3 {
        let xstar = *zeros.last().expect("non-empty");
        return Ok(xs.iter().map(|&x| two_branch(x, xstar, delta)).collect());
    }
    // one zero: blend in an even pinch factor vanishing at +-x*, run the
    // two-branch homotopy on the pinched profile, then blend back out
    let xstar = PINCH_FRACTION * h;
    let raw: Vec<f64> = xs.iter().map(|&x| x * x - xstar * xstar).collect();
    let peak = vo.max_abs();
    let pinched_peak = (0..n).map(|i| (raw[i] * vo.nodes[i]).abs()).fold(0.0, f64::max);
    let kappa = peak / pinched_peak;
    let pinch: Vec<f64> = raw.iter().map(|w| kappa * w).collect();
    let m = (0..n)
        .map(|i| {
            let w = pinch[i];
            if delta <= 0.25 {
                let tau = 4.0 * delta;
                (1.0 - tau) + tau * w
            } else if delta <= 0.75 {
                w * two_branch(xs[i], xstar, 2.0 * (delta - 0.25))
            } else {
                let tau = 4.0 * (delta - 0.75);
                -((1.0 - tau) * w + tau)
            }
        })
        .collect();
    Ok(m)
}

/// Deform one profile: `V_e + s m V_o` evaluated as a blend of `V(x)` and
/// `V(-x)` so that the identity (`m = 1`) and the reflection (`m = -1`) are
/// reproduced bit for bit.
fn apply_multiplier(v: &FlowProfile, m: &[f64], s: f64) -> FlowProfile {
    let n = v.nodes.len();
    let nodes = (0..n)
        .map(|i| {
            let a = v.nodes[i];
            let b = v.nodes[n - 1 - i];
            let c = s * m[i];
            if c == 1.0 {
                a
            } else if c == -1.0 {
                b
            } else {
                0.5 * (1.0 + c) * a + 0.5 * (1.0 - c) * b
            }
        })
        .collect();
    v.with_nodes(nodes)
}

/// Member `delta` of the flow homotopy from `P` (`delta = 0`) to its
/// reflection (`delta = 1`).
///
/// Only odd parts change, so endpoint values and fluxes are preserved. If the
/// deformed pair exceeds the norm budget `r`, its odd parts are shrunk by the
/// largest common factor `s in (0, 1]` that restores it.
pub fn flow_homotopy(p: &FlowShapePair, delta: f64, c: &FlowClassParams) -> Result<FlowShapePair, FlowError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(FlowError::DeltaOutOfRange(delta));
    }
    let report = is_admissible_flow(p, c);
    if !report.admissible {
        return Err(FlowError::NotAdmissible(report.violations));
    }
    if p.u != 0 {
        return Err(FlowError::ReflectionNeedsUZero);
    }
    if delta == 0.0 {
        return Ok(p.clone());
    }
    let (_, in_o) = even_odd_split(&p.v_in);
    let (_, out_o) = even_odd_split(&p.v_out);
    let m_in = multiplier_or_identity(&in_o, delta)?;
    let m_out = multiplier_or_identity(&out_o, delta)?;
    if m_in.is_none() && m_out.is_none() {
        return Err(FlowError::IdenticallyZeroOddPart);
    }
    // an even side is left as is, which keeps any exact representation
    let side = |v: &FlowProfile, m: &Option<Vec<f64>>, s: f64| match m {
        Some(m) => apply_multiplier(v, m, s),
        None => v.clone(),
    };
    let build = |s: f64| FlowShapePair { v_in: side(&p.v_in, &m_in, s), v_out: side(&p.v_out, &m_out, s), u: p.u };
    let full = build(1.0);
    let budget = c.r * (1.0 + NORM_SLACK);
    if full.norm() <= budget {
        return Ok(full);
    }
    // the norm is convex in s and admissible at s = 0, so bisect for the
    // boundary of the feasible interval
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if build(mid).norm() <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(build(lo))
}

fn multiplier_or_identity(vo: &FlowProfile, delta: f64) -> Result<Option<Vec<f64>>, FlowError> {
    match odd_multiplier(vo, delta) {
        Ok(m) => Ok(Some(m)),
        Err(FlowError::IdenticallyZeroOddPart) => Ok(None),
        Err(e) => Err(e),
    }
}
