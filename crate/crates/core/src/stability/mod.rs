//! Zero-lift search along the body/flow homotopy, the instability measure
//! `γ_{r,U}(B)` and the search for bodies that minimize it.

mod bolzano;
mod continuity;
mod gamma;
mod shape;

pub use bolzano::*;
pub use continuity::*;
pub use gamma::*;
pub use shape::*;

use thiserror::Error;

use crate::flowshape::FlowError;
use crate::geometry::{hausdorff_distance, reflect_body, BodyShape, GeometryError, Rect};
use crate::lift::LiftError;
use crate::mesh::{generate_mesh, Mesh, MeshError, MeshOptions};
use crate::ns_solver::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("no sign change: {0}")]
    NoSignChange(String),
    #[error("lift tolerance not reached within {solves} solves (|lift| = {lift:e})")]
    NotConverged { solves: usize, lift: f64 },
    #[error("invalid homotopy path: {0}")]
    InvalidPath(String),
    #[error("infeasible flow class: {0}")]
    InfeasibleClass(String),
    #[error("projection into the body class failed after {0} iterations")]
    ProjectionFailed(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Lift(#[from] LiftError),
}

/// True when the body coincides with its mirror image `x2 -> -x2`.
pub fn is_symmetric_body(b: &BodyShape) -> bool {
    hausdorff_distance(b, &reflect_body(b)) <= 1e-12 * b.diameter()
}

/// Mesh `R \ B`, using a mirror-symmetric mesh when `B` is symmetric.
pub fn mesh_for_body(rect: &Rect, body: &BodyShape, opts: &MeshOptions) -> Result<Mesh, MeshError> {
    if is_symmetric_body(body) {
        generate_mesh(rect, Some(body), &opts.clone().mirrored())
    } else {
        generate_mesh(rect, Some(body), opts)
    }
}
