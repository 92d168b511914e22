//! Reference P2/P1 element data and quadrature rules.

use crate::geometry::Point;

/// Degree-5 seven-point rule on the reference triangle, as barycentric
/// coordinates with weights summing to one.
pub(crate) const TRI_QUAD: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_8;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_1;
    const C: f64 = 1.0 / 3.0;
    [
        ([C, C, C], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Three-point Gauss rule on `[0, 1]` (exact to degree 5).
pub(crate) const EDGE_QUAD: [(f64, f64); 3] = {
    const D: f64 = 0.387_298_334_620_741_7; // sqrt(3/5) / 2
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};

/// Local edge `k` joins local vertices `EDGE_VERTS[k]`; its P2 node is local
/// node `3 + k`.
pub(crate) const EDGE_VERTS: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Affine element geometry: area and barycentric gradients.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geom {
    pub area: f64,
    pub grad_l: [[f64; 2]; 3],
}

impl Geom {
    pub fn new(p: [Point; 3]) -> Geom {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let gx = [(p[2][1] - p[0][1]) / det, -(p[2][0] - p[0][0]) / det];
        let gy = [-(p[1][1] - p[0][1]) / det, (p[1][0] - p[0][0]) / det];
        Geom { area: 0.5 * det, grad_l: [[-gx[0] - gy[0], -gx[1] - gy[1]], gx, gy] }
    }
}

/// P2 basis values at barycentric point `l`.
pub(crate) fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// P2 basis gradients at barycentric point `l`.
pub(crate) fn p2_grads(l: [f64; 3], g: &Geom) -> [[f64; 2]; 6] {
    let gl = &g.grad_l;
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * gl[i][0], s * gl[i][1]];
    }
    for (k, [a, b]) in EDGE_VERTS.iter().copied().enumerate() {
        out[3 + k] = [
            4.0 * (l[b] * gl[a][0] + l[a] * gl[b][0]),
            4.0 * (l[b] * gl[a][1] + l[a] * gl[b][1]),
        ];
    }
    out
}
