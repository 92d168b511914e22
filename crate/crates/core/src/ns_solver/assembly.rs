//! Element kernels and sparse scatter for the Navier–Stokes residual and its
//! linearizations.

use super::element::{p2_grads, p2_values, Geom, TRI_QUAD};
use super::space::TaylorHood;
use super::ConvectionForm;

/// Local unknown layout: `u1` at the six velocity nodes, then `u2`, then
/// the three pressure vertices.
pub(crate) const NLOC: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Linearization {
    Newton,
    /// Convecting field frozen at the current iterate.
    Picard,
}

/// Full unknown index of local unknown `r` of element `el`.
pub(crate) fn global_dof(space: &TaylorHood, el: &[usize; 6], r: usize) -> usize {
    let n2 = space.n_velocity_nodes();
    match r {
        0..=5 => el[r],
        6..=11 => n2 + el[r - 6],
        _ => 2 * n2 + el[r - 12],
    }
}

/// Element residual and, when `jac` is given, the element Jacobian
/// (row-major, `NLOC x NLOC`), for local unknown values `x`.
pub(crate) fn element(
    geom: &Geom,
    x: &[f64; NLOC],
    form: ConvectionForm,
    lin: Linearization,
    res: &mut [f64; NLOC],
    mut jac: Option<&mut [f64; NLOC * NLOC]>,
) {
    for (bary, wq) in TRI_QUAD {
        let w = wq * geom.area;
        let phi = p2_values(bary);
        let dphi = p2_grads(bary, geom);
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for k in 0..6 {
            for a in 0..2 {
                let c = x[6 * a + k];
                u[a] += c * phi[k];
                g[a][0] += c * dphi[k][0];
                g[a][1] += c * dphi[k][1];
            }
        }
        let p = x[12] * bary[0] + x[13] * bary[1] + x[14] * bary[2];
        let div = g[0][0] + g[1][1];
        let ug = [u[0] * g[0][0] + u[1] * g[0][1], u[0] * g[1][0] + u[1] * g[1][1]];
        let adv: [f64; 6] = std::array::from_fn(|k| u[0] * dphi[k][0] + u[1] * dphi[k][1]);
        for i in 0..6 {
            for a in 0..2 {
                let visc = g[a][0] * dphi[i][0] + g[a][1] * dphi[i][1];
                let conv = match form {
                    ConvectionForm::Standard => ug[a] * phi[i],
                    ConvectionForm::Skew => 0.5 * (ug[a] * phi[i] - adv[i] * u[a]),
                };
                res[6 * a + i] += w * (visc + conv - p * dphi[i][a]);
            }
        }
        for j in 0..3 {
            res[12 + j] -= w * bary[j] * div;
        }
        let Some(jac) = jac.as_deref_mut() else { continue };
        for i in 0..6 {
            for k in 0..6 {
                let lap = dphi[k][0] * dphi[i][0] + dphi[k][1] * dphi[i][1];
                let pk_pi = phi[k] * phi[i];
                for a in 0..2 {
                    for b in 0..2 {
                        let same = if a == b { 1.0 } else { 0.0 };
                        let conv = match (form, lin) {
                            (ConvectionForm::Standard, Linearization::Newton) => {
                                same * adv[k] * phi[i] + g[a][b] * pk_pi
                            }
                            (ConvectionForm::Standard, Linearization::Picard) => same * adv[k] * phi[i],
                            (ConvectionForm::Skew, Linearization::Newton) => {
                                0.5 * (g[a][b] * pk_pi + same * (adv[k] * phi[i] - adv[i] * phi[k])
                                    - phi[k] * dphi[i][b] * u[a])
                            }
                            (ConvectionForm::Skew, Linearization::Picard) => {
                                0.5 * same * (adv[k] * phi[i] - adv[i] * phi[k])
                            }
                        };
                        jac[(6 * a + i) * NLOC + 6 * b + k] += w * (same * lap + conv);
                    }
                }
            }
            for j in 0..3 {
                for a in 0..2 {
                    let v = -w * bary[j] * dphi[i][a];
                    jac[(6 * a + i) * NLOC + 12 + j] += v;
                    jac[(12 + j) * NLOC + 6 * a + i] += v;
                }
            }
        }
    }
}

/// Compressed-column pattern of the Jacobian restricted to free unknowns,
/// with the value slot of every element entry precomputed.
#[derive(Debug)]
pub(crate) struct Pattern {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    /// `slots[e * NLOC^2 + r * NLOC + c]`: value index of local entry (r, c)
    /// of element e, or `u32::MAX` if either unknown is fixed.
    pub slots: Vec<u32>,
}

impl Pattern {
    pub fn new(space: &TaylorHood, free: &[usize]) -> Pattern {
        let n = free.iter().filter(|&&f| f != usize::MAX).count();
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut loc = [usize::MAX; NLOC];
        for el in space.elements() {
            for (r, l) in loc.iter_mut().enumerate() {
                *l = free[global_dof(space, el, r)];
            }
            for &c in &loc {
                if c == usize::MAX {
                    continue;
                }
                cols[c].extend(loc.iter().copied().filter(|&r| r != usize::MAX));
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
            *col = Vec::new();
        }
        assert!(row_idx.len() < u32::MAX as usize, "Jacobian too large");
        let mut slots = vec![u32::MAX; space.elements().len() * NLOC * NLOC];
        for (e, el) in space.elements().iter().enumerate() {
            for (r, l) in loc.iter_mut().enumerate() {
                *l = free[global_dof(space, el, r)];
            }
            for r in 0..NLOC {
                for c in 0..NLOC {
                    let (fr, fc) = (loc[r], loc[c]);
                    if fr == usize::MAX || fc == usize::MAX {
                        continue;
                    }
                    let range = &row_idx[col_ptr[fc]..col_ptr[fc + 1]];
                    let k = range.binary_search(&fr).expect("entry in pattern");
                    slots[e * NLOC * NLOC + r * NLOC + c] = (col_ptr[fc] + k) as u32;
                }
            }
        }
        Pattern { n, col_ptr, row_idx, slots }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }
}
