//! Vertex trace elimination and assembly of the discrete operator.
//!
//! The unknowns are the interior node values only. Endpoint (vertex) values
//! are eliminated through the boundary conditions: approximating the outgoing
//! derivative of slot `j` at a vertex by the one-sided second-order stencil
//!
//! ```text
//! u'_j(v) ≈ (-3ψ_{j,0} + 4ψ_{j,-1} - ψ_{j,-2}) / (2 δx_j),
//! ```
//!
//! the condition `A_v ψ_{v,0} + B_v u'(v) = 0` becomes the linear system
//!
//! ```text
//! (3 B_v D - A_v) ψ_{v,0} = B_v D (4 ψ_{v,-1} - ψ_{v,-2}),   D = diag(1/(2δx_j)),
//! ```
//!
//! so the traces depend linearly on the first two interior values of each
//! incident slot: `ψ_{v,0} = K_v (4ψ_{v,-1} - ψ_{v,-2})`. With uniform
//! spacing `K_v = (3B_v - 2δx A_v)⁻¹ B_v`. Substituting the traces into the
//! three-point Laplacian at the boundary-adjacent nodes yields a sparse
//! matrix `[H] ≈ -Δ` over the interior nodes: tridiagonal inside each edge
//! plus coupling entries between edges that meet at a vertex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{EdgeEnd, EdgeId, MetricGraph, VertexId};
use crate::mesh::{GraphFunction, Mesh};

/// Trace systems with a condition number beyond this are treated as singular.
const TRACE_COND_LIMIT: f64 = 1e12;

/// Wiring of one vertex slot into the global index space.
#[derive(Debug, Clone, Copy)]
pub struct SlotWiring {
    pub edge: EdgeId,
    /// Global index of the interior node adjacent to the vertex.
    pub first: usize,
    /// Global index of the next interior node inward.
    pub second: usize,
    /// Grid spacing of the slot's edge.
    pub dx: f64,
}

#[derive(Debug, Clone)]
pub struct VertexTrace {
    pub vertex: VertexId,
    /// `ψ_{v,0} = K (4ψ_{v,-1} - ψ_{v,-2})` in slot order.
    pub coefficients: DMatrix<f64>,
    pub slots: Vec<SlotWiring>,
}

/// Per-vertex trace reconstruction data for one (graph, mesh) pair.
#[derive(Debug, Clone)]
pub struct TraceMap {
    vertices: Vec<VertexTrace>,
    /// For each edge: slot position of its Start/End inside the incident
    /// vertex's slot list, as (vertex index, slot position).
    edge_ends: Vec<[(usize, usize); 2]>,
}

/// Solves the per-vertex trace system for `condition` with per-slot spacings
/// `dx`. Returns `K` with `ψ_{v,0} = K (4ψ_{v,-1} - ψ_{v,-2})`.
///
/// Fails with `SingularTraceSystem` when `3BD - A` is numerically singular
/// at these spacings (condition number above 1e12).
pub fn trace_coefficients(
    condition: &crate::graph::VertexCondition,
    dx: &[f64],
    vertex_label: &str,
) -> Result<DMatrix<f64>> {
    let d = condition.degree();
    assert_eq!(dx.len(), d, "one spacing per slot");
    let a = condition.a_matrix();
    let b = condition.b_matrix();
    // system = 3·B·D - A,  rhs factor = B·D,  D = diag(1/(2δx_j))
    let mut system = DMatrix::zeros(d, d);
    let mut b_scaled = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let w = 1.0 / (2.0 * dx[j]);
            b_scaled[(i, j)] = b[(i, j)] * w;
            system[(i, j)] = 3.0 * b_scaled[(i, j)] - a[(i, j)];
        }
    }
    let svd = system.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > TRACE_COND_LIMIT {
        return Err(Error::SingularTraceSystem {
            vertex: vertex_label.to_string(),
            cond,
        });
    }
    let inv = system
        .try_inverse()
        .ok_or_else(|| Error::SingularTraceSystem {
            vertex: vertex_label.to_string(),
            cond,
        })?;
    Ok(inv * b_scaled)
}

impl TraceMap {
    pub fn build(graph: &MetricGraph, mesh: &Mesh) -> Result<Self> {
        let mut vertices = Vec::with_capacity(graph.num_vertices());
        let mut edge_ends = vec![[(usize::MAX, usize::MAX); 2]; graph.num_edges()];
        for v in 0..graph.num_vertices() {
            let vid = VertexId(v);
            let slots = graph.slots(vid);
            let mut wirings = Vec::with_capacity(slots.len());
            let mut spacings = Vec::with_capacity(slots.len());
            for (pos, slot) in slots.iter().enumerate() {
                let n = mesh.count(slot.edge);
                let (first_k, second_k) = match slot.end {
                    EdgeEnd::Start => (1, 2),
                    EdgeEnd::End => (n, n - 1),
                };
                wirings.push(SlotWiring {
                    edge: slot.edge,
                    first: mesh.node_index(slot.edge, first_k),
                    second: mesh.node_index(slot.edge, second_k),
                    dx: mesh.spacing(slot.edge),
                });
                spacings.push(mesh.spacing(slot.edge));
                let side = match slot.end {
                    EdgeEnd::Start => 0,
                    EdgeEnd::End => 1,
                };
                edge_ends[slot.edge.0][side] = (v, pos);
            }
            let coefficients =
                trace_coefficients(graph.condition(vid), &spacings, graph.vertex_label(vid))?;
            vertices.push(VertexTrace {
                vertex: vid,
                coefficients,
                slots: wirings,
            });
        }
        Ok(Self {
            vertices,
            edge_ends,
        })
    }

    pub fn vertices(&self) -> &[VertexTrace] {
        &self.vertices
    }

    /// Trace values at `vertex` in slot order.
    pub fn traces_at(&self, vertex: VertexId, values: &[f64]) -> DVector<f64> {
        let vt = &self.vertices[vertex.0];
        let d = vt.slots.len();
        let mut rhs = DVector::zeros(d);
        for (j, w) in vt.slots.iter().enumerate() {
            rhs[j] = 4.0 * values[w.first] - values[w.second];
        }
        &vt.coefficients * rhs
    }

    /// Trace of a single edge end.
    pub fn edge_trace(&self, edge: EdgeId, end: EdgeEnd, values: &[f64]) -> f64 {
        let side = match end {
            EdgeEnd::Start => 0,
            EdgeEnd::End => 1,
        };
        let (v, pos) = self.edge_ends[edge.0][side];
        let vt = &self.vertices[v];
        let mut acc = 0.0;
        for (j, w) in vt.slots.iter().enumerate() {
            acc += vt.coefficients[(pos, j)] * (4.0 * values[w.first] - values[w.second]);
        }
        acc
    }
}

/// Reconstructs the eliminated vertex values of `field`, per vertex in slot
/// order. Reconstruction is linear in the field.
pub fn reconstruct_traces(field: &GraphFunction, trace_map: &TraceMap) -> Vec<DVector<f64>> {
    trace_map
        .vertices
        .iter()
        .map(|vt| trace_map.traces_at(vt.vertex, field.values()))
        .collect()
}

/// Sparse matrix over the interior nodes in compressed-row layout.
///
/// Generically non-symmetric: the one-sided trace elimination couples rows
/// near a vertex to the incident edges in a direction-dependent way.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Index into the value array of the diagonal entry of each row.
    /// Assembly guarantees the diagonal entry is structurally present.
    pub fn diagonal_indices(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let pos = self.cols[lo..hi]
                .iter()
                .position(|&c| c == i)
                .expect("diagonal entry present");
            idx.push(lo + pos);
        }
        idx
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Writes the nonzero pattern as `row col value` lines (0-based indices).
    pub fn dump_coordinates<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {}", i, j, v)?;
            }
        }
        Ok(())
    }
}

/// Assembles `[H] ≈ -Δ` over the interior nodes (sign convention: `H` is the
/// positive Laplacian, `H = -∂ₓₓ`).
///
/// Interior rows carry the `(-1, 2, -1)/δx²` stencil. Rows adjacent to a
/// vertex eliminate the trace through the trace map: row `(e,1)` reads
///
/// ```text
/// (2ψ_{e,1} - ψ_{e,2} - Σ_j K[i][j](4ψ_{j,-1} - ψ_{j,-2})) / δx_e²,
/// ```
///
/// where `i` is the edge's slot position at the vertex, so each incident slot
/// contributes `-4K[i][j]/δx_e²` at its first interior node and
/// `+K[i][j]/δx_e²` at its second.
pub fn assemble_h(graph: &MetricGraph, mesh: &Mesh) -> Result<(SparseOperator, TraceMap)> {
    let trace_map = TraceMap::build(graph, mesh)?;
    let n = mesh.total_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    for e in 0..graph.num_edges() {
        let edge = EdgeId(e);
        let ne = mesh.count(edge);
        let dx = mesh.spacing(edge);
        let inv_dx2 = 1.0 / (dx * dx);
        for k in 1..=ne {
            let i = mesh.node_index(edge, k);
            let row = &mut rows[i];
            row.push((i, 2.0 * inv_dx2));
            if k > 1 {
                row.push((mesh.node_index(edge, k - 1), -inv_dx2));
            }
            if k < ne {
                row.push((mesh.node_index(edge, k + 1), -inv_dx2));
            }
        }
    }

    // Boundary-adjacent rows: substitute the eliminated traces.
    for vt in trace_map.vertices() {
        for (i, wi) in vt.slots.iter().enumerate() {
            let inv_dx2 = 1.0 / (wi.dx * wi.dx);
            let row_idx = wi.first;
            for (j, wj) in vt.slots.iter().enumerate() {
                let c = vt.coefficients[(i, j)];
                if c != 0.0 {
                    rows[row_idx].push((wj.first, -4.0 * c * inv_dx2));
                    rows[row_idx].push((wj.second, c * inv_dx2));
                }
            }
        }
    }

    // Merge duplicate column entries, sort, and make sure the diagonal slot
    // exists even if its value cancelled.
    for (i, row) in rows.iter_mut().enumerate() {
        row.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        if !merged.iter().any(|&(c, _)| c == i) {
            merged.push((i, 0.0));
            merged.sort_by_key(|&(c, _)| c);
        }
        *row = merged;
    }

    Ok((SparseOperator::from_rows(rows), trace_map))
}

/// Trapezoidal quadrature weights: each interior node carries `δx_e`, each
/// reconstructed edge-end trace carries `δx_e/2`.
///
/// Weighted inner product of two fields, traces included.
pub fn weighted_dot(u: &GraphFunction, v: &GraphFunction, tm: &TraceMap) -> f64 {
    weighted_dot_values(u.values(), v.values(), u.mesh(), tm)
}

pub fn weighted_dot_values(u: &[f64], v: &[f64], mesh: &Mesh, tm: &TraceMap) -> f64 {
    let mut acc = 0.0;
    for e in 0..mesh.num_edges() {
        let edge = EdgeId(e);
        let dx = mesh.spacing(edge);
        let mut edge_acc = 0.0;
        for k in 1..=mesh.count(edge) {
            let i = mesh.node_index(edge, k);
            edge_acc += u[i] * v[i];
        }
        let u0 = tm.edge_trace(edge, EdgeEnd::Start, u);
        let v0 = tm.edge_trace(edge, EdgeEnd::Start, v);
        let u1 = tm.edge_trace(edge, EdgeEnd::End, u);
        let v1 = tm.edge_trace(edge, EdgeEnd::End, v);
        acc += dx * (edge_acc + 0.5 * (u0 * v0 + u1 * v1));
    }
    acc
}

/// Weighted sum `Σ_w f(ψ)` with the same trapezoidal quadrature.
pub fn weighted_sum(field: &GraphFunction, tm: &TraceMap, f: impl Fn(f64) -> f64) -> f64 {
    let mesh = field.mesh();
    let values = field.values();
    let mut acc = 0.0;
    for e in 0..mesh.num_edges() {
        let edge = EdgeId(e);
        let dx = mesh.spacing(edge);
        let mut edge_acc = 0.0;
        for k in 1..=mesh.count(edge) {
            edge_acc += f(values[mesh.node_index(edge, k)]);
        }
        let t0 = tm.edge_trace(edge, EdgeEnd::Start, values);
        let t1 = tm.edge_trace(edge, EdgeEnd::End, values);
        acc += dx * (edge_acc + 0.5 * (f(t0) + f(t1)));
    }
    acc
}

/// Norms of a field under the trace-inclusive trapezoidal quadrature.
#[derive(Debug, Clone, Copy)]
pub struct WeightedNorms {
    /// `Σ_w |ψ|²` — the squared L² norm.
    pub mass: f64,
    pub l2: f64,
    /// `(Σ_w |ψ|⁴)^{1/4}`.
    pub l4: f64,
}

pub fn weighted_norms(field: &GraphFunction, tm: &TraceMap) -> WeightedNorms {
    let mass = weighted_sum(field, tm, |x| x * x);
    let quartic = weighted_sum(field, tm, |x| {
        let s = x * x;
        s * s
    });
    WeightedNorms {
        mass,
        l2: mass.sqrt(),
        l4: quartic.powf(0.25),
    }
}

/// Weighted L² norm of a plain value vector.
pub fn weighted_l2_values(values: &[f64], mesh: &Mesh, tm: &TraceMap) -> f64 {
    weighted_dot_values(values, values, mesh, tm).sqrt()
}
