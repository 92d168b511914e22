use std::collections::HashMap;
use std::sync::Arc;

use super::element::EDGE_VERTS;
use crate::geometry::Point;
use crate::mesh::Mesh;

/// Taylor–Hood P2/P1 space on a mesh. P2 nodes are the mesh vertices
/// (same indices) followed by one node per edge; pressure lives on vertices.
#[derive(Debug)]
pub struct TaylorHood {
    mesh: Arc<Mesh>,
    nodes: Vec<Point>,
    elements: Vec<[usize; 6]>,
    boundary_mid: Vec<usize>,
}

impl TaylorHood {
    pub fn new(mesh: Arc<Mesh>) -> TaylorHood {
        let nv = mesh.nodes().len();
        let mut nodes = mesh.nodes().to_vec();
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut elements = Vec::with_capacity(mesh.triangles().len());
        for t in mesh.triangles() {
            let mut el = [t[0], t[1], t[2], 0, 0, 0];
            for (k, [a, b]) in EDGE_VERTS.iter().copied().enumerate() {
                let key = (t[a].min(t[b]), t[a].max(t[b]));
                let id = *edge_id.entry(key).or_insert_with(|| {
                    let (p, q) = (nodes[t[a]], nodes[t[b]]);
                    nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    nodes.len() - 1
                });
                el[3 + k] = id;
            }
            elements.push(el);
        }
        let boundary_mid = mesh
            .boundary()
            .iter()
            .map(|e| edge_id[&(e.edge[0].min(e.edge[1]), e.edge[0].max(e.edge[1]))])
            .collect();
        debug_assert!(nodes.len() >= nv);
        TaylorHood { mesh, nodes, elements, boundary_mid }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Coordinates of the velocity nodes.
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Velocity nodes of each triangle: vertices, then the midpoints of
    /// edges (0,1), (1,2), (2,0).
    pub fn elements(&self) -> &[[usize; 6]] {
        &self.elements
    }

    pub fn n_velocity_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_pressure_nodes(&self) -> usize {
        self.mesh.nodes().len()
    }

    /// Total number of unknowns (two velocity components plus pressure).
    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len() + self.mesh.nodes().len()
    }

    /// Velocity node at the midpoint of mesh boundary edge `i`.
    pub fn boundary_midpoint(&self, i: usize) -> usize {
        self.boundary_mid[i]
    }
}
