//! Uniform interior meshes on the edges of a metric graph.
//!
//! Edge `e` of length `l_e` carries `N_e ≥ 3` interior nodes
//! `x_{e,k} = k·δx_e`, `1 ≤ k ≤ N_e`, with `δx_e = l_e/(N_e + 1)`. The edge
//! endpoints are not unknowns: their values are reconstructed from the vertex
//! conditions (see [`crate::operator::TraceMap`]).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MetricGraph};

/// Per-edge interior grid layout and the global index map.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Interior node counts per edge.
    counts: Vec<usize>,
    /// Grid spacing per edge, `l_e/(N_e+1)`.
    spacings: Vec<f64>,
    /// Global index of each edge's first interior node.
    offsets: Vec<usize>,
    total: usize,
}

impl Mesh {
    /// Interior node count of `edge`.
    pub fn count(&self, edge: EdgeId) -> usize {
        self.counts[edge.0]
    }

    /// Grid spacing of `edge`.
    pub fn spacing(&self, edge: EdgeId) -> f64 {
        self.spacings[edge.0]
    }

    /// Total number of interior nodes over all edges.
    pub fn total_nodes(&self) -> usize {
        self.total
    }

    pub fn num_edges(&self) -> usize {
        self.counts.len()
    }

    /// Global index of node `(edge, k)`, `1 ≤ k ≤ N_e`.
    pub fn node_index(&self, edge: EdgeId, k: usize) -> usize {
        debug_assert!((1..=self.counts[edge.0]).contains(&k));
        self.offsets[edge.0] + (k - 1)
    }

    /// Arclength coordinate of node `(edge, k)` measured from the edge start.
    pub fn coordinate(&self, edge: EdgeId, k: usize) -> f64 {
        k as f64 * self.spacings[edge.0]
    }

    /// Iterate over `(edge, k, global_index)` in global index order.
    pub fn nodes(&self) -> impl Iterator<Item = (EdgeId, usize, usize)> + '_ {
        self.counts.iter().enumerate().flat_map(move |(e, &n)| {
            (1..=n).map(move |k| (EdgeId(e), k, self.offsets[e] + k - 1))
        })
    }
}

/// Builds a mesh with a prescribed interior node count per edge.
pub fn build_mesh_with_counts(graph: &MetricGraph, counts: &[usize]) -> Result<Mesh> {
    if counts.len() != graph.num_edges() {
        return Err(Error::InvalidParameter(format!(
            "expected {} per-edge counts, got {}",
            graph.num_edges(),
            counts.len()
        )));
    }
    for (e, &n) in counts.iter().enumerate() {
        if n < 3 {
            return Err(Error::MeshTooCoarse {
                edge: graph.edge(EdgeId(e)).label.clone(),
                nodes: n,
            });
        }
    }
    let mut offsets = Vec::with_capacity(counts.len());
    let mut total = 0usize;
    let mut spacings = Vec::with_capacity(counts.len());
    for (e, &n) in counts.iter().enumerate() {
        offsets.push(total);
        total += n;
        spacings.push(graph.edge(EdgeId(e)).length / (n as f64 + 1.0));
    }
    Ok(Mesh {
        counts: counts.to_vec(),
        spacings,
        offsets,
        total,
    })
}

/// Builds a mesh targeting the spacing `target_dx` on every edge:
/// `N_e = round(l_e/target_dx) - 1`. Errors with `MeshTooCoarse` if that
/// leaves fewer than 3 interior nodes on some edge.
pub fn build_mesh(graph: &MetricGraph, target_dx: f64) -> Result<Mesh> {
    if !(target_dx.is_finite() && target_dx > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target spacing must be positive, got {target_dx}"
        )));
    }
    let counts: Vec<usize> = graph
        .edges()
        .iter()
        .map(|e| ((e.length / target_dx).round() as isize - 1).max(0) as usize)
        .collect();
    build_mesh_with_counts(graph, &counts)
}

/// Builds a mesh with the same interior node count on every edge.
pub fn build_mesh_uniform_count(graph: &MetricGraph, nodes_per_edge: usize) -> Result<Mesh> {
    build_mesh_with_counts(graph, &vec![nodes_per_edge; graph.num_edges()])
}

/// A real-valued field over the interior mesh nodes.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GraphFunction {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.total_nodes();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.total_nodes() {
            return Err(Error::FieldSizeMismatch {
                field: values.len(),
                mesh: mesh.total_nodes(),
            });
        }
        Ok(Self { mesh, values })
    }

    /// Samples `f(edge, x)` at every interior node.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(EdgeId, f64) -> f64) -> Self {
        let mut values = vec![0.0; mesh.total_nodes()];
        for (e, k, idx) in mesh.nodes() {
            values[idx] = f(e, mesh.coordinate(e, k));
        }
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, edge: EdgeId, k: usize) -> f64 {
        self.values[self.mesh.node_index(edge, k)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Maximum absolute node value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
