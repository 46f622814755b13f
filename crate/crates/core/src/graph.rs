//! Metric graphs and vertex boundary conditions.
//!
//! A metric graph is a set of vertices joined by edges of finite positive
//! length; each edge `e` is identified with the interval `[0, l_e]`, oriented
//! from its `from` vertex to its `to` vertex. At every vertex `v` of degree
//! `d_v` the boundary behaviour of a function is prescribed by a matrix pair
//! `(A_v, B_v)` through
//!
//! ```text
//! A_v u(v) + B_v u'(v) = 0,
//! ```
//!
//! where `u(v)` collects the edge traces at `v` and `u'(v)` the derivatives
//! taken in the direction pointing away from the vertex into each edge. The
//! pair defines a self-adjoint Laplacian exactly when `(A_v | B_v)` has full
//! rank and `A_v·B_vᵀ` is symmetric; [`VertexCondition::validate`] checks
//! both.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{ConditionDefect, Error, Result};

/// Index of a vertex inside a [`MetricGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

/// Index of an edge inside a [`MetricGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

/// Which end of an edge a slot refers to (`Start` is the `x = 0` end).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeEnd {
    Start,
    End,
}

/// One row/column position of a vertex condition: an incident (edge, end).
///
/// A loop edge contributes two slots to its vertex. Slots are ordered by
/// edge index, `Start` before `End`, which fixes the row and column
/// convention of `(A_v, B_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub edge: EdgeId,
    pub end: EdgeEnd,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub label: String,
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
}

/// Boundary condition matrices `(A_v, B_v)` at a single vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexCondition {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

/// Relative tolerance for the rank decision in [`VertexCondition::validate`].
const RANK_TOL: f64 = 1e-10;
/// Entrywise tolerance for the symmetry of `A·Bᵀ`.
const SYMMETRY_TOL: f64 = 1e-12;

impl VertexCondition {
    /// Builds a condition from raw matrices. Both must be square of the same
    /// size; validity is checked separately by [`validate`](Self::validate).
    pub fn from_matrices(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
            return Err(Error::InvalidParameter(format!(
                "condition matrices must be square and of equal size, got {}x{} and {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if a.is_empty() {
            return Err(Error::InvalidDegree(0));
        }
        Ok(Self { a, b })
    }

    /// Kirchhoff-Neumann coupling: continuity of the function across the
    /// vertex and zero sum of outgoing derivatives.
    ///
    /// `A` has rows `e_i - e_{i+1}` for `i = 1..d-1` and a zero last row;
    /// `B` is zero except for a last row of ones. For `d = 1` this degenerates
    /// to the Neumann condition `u' = 0`.
    pub fn kirchhoff(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidDegree(0));
        }
        let mut a = DMatrix::zeros(degree, degree);
        let mut b = DMatrix::zeros(degree, degree);
        for i in 0..degree - 1 {
            a[(i, i)] = 1.0;
            a[(i, i + 1)] = -1.0;
        }
        for j in 0..degree {
            b[(degree - 1, j)] = 1.0;
        }
        Ok(Self { a, b })
    }

    /// δ coupling of strength `alpha`: continuity plus
    /// `Σ u'_e(v) = alpha·u(v)`. `alpha = 0` recovers Kirchhoff-Neumann.
    pub fn delta(degree: usize, alpha: f64) -> Result<Self> {
        let mut cond = Self::kirchhoff(degree)?;
        cond.a[(degree - 1, 0)] = -alpha;
        Ok(cond)
    }

    /// δ′ coupling on a degree-2 vertex with parameter `beta ≠ 0`:
    /// `u_1 = u_2 + β·(du_2 toward the vertex)` together with a zero sum of
    /// outgoing derivatives (the derivative itself is continuous through the
    /// vertex when the edges are read as the two halves of a line).
    pub fn delta_prime(beta: f64) -> Result<Self> {
        if beta == 0.0 {
            return Err(Error::InvalidParameter(
                "delta-prime strength must be nonzero (use kirchhoff for beta = 0)".into(),
            ));
        }
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, -beta, 1.0, 1.0]);
        Ok(Self { a, b })
    }

    /// Homogeneous Dirichlet condition at a degree-1 vertex: trace zero.
    pub fn dirichlet() -> Self {
        Self {
            a: DMatrix::from_row_slice(1, 1, &[1.0]),
            b: DMatrix::from_row_slice(1, 1, &[0.0]),
        }
    }

    /// Dipole (scaling) coupling on a degree-2 vertex:
    /// `u_1 + τ·u_2 = 0` and `τ·u'_1 - u'_2 = 0`, i.e. the value scales by
    /// `-1/τ` across the vertex while the derivative scales by `-τ`, which
    /// preserves the Wronskian and keeps the operator self-adjoint.
    pub fn dipole(tau: f64) -> Result<Self> {
        if tau == 0.0 {
            return Err(Error::InvalidParameter(
                "dipole parameter must be nonzero (tau = 0 decouples the edges)".into(),
            ));
        }
        let a = DMatrix::from_row_slice(2, 2, &[1.0, tau, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, tau, -1.0]);
        Ok(Self { a, b })
    }

    pub fn degree(&self) -> usize {
        self.a.nrows()
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Checks the self-adjointness criterion: `(A|B)` of maximal rank and
    /// `A·Bᵀ` symmetric.
    pub fn validate(&self) -> std::result::Result<(), ConditionDefect> {
        let d = self.degree();
        let mut stacked = DMatrix::zeros(d, 2 * d);
        stacked.view_mut((0, 0), (d, d)).copy_from(&self.a);
        stacked.view_mut((0, d), (d, d)).copy_from(&self.b);
        let scale = stacked.amax().max(1.0);
        if matrix_rank(&stacked, RANK_TOL * scale) < d {
            return Err(ConditionDefect::RankDeficient);
        }
        let ab = &self.a * self.b.transpose();
        for i in 0..d {
            for j in (i + 1)..d {
                if (ab[(i, j)] - ab[(j, i)]).abs() > SYMMETRY_TOL * scale.powi(2) {
                    return Err(ConditionDefect::NonSymmetric);
                }
            }
        }
        Ok(())
    }
}

/// Numerical rank via singular values above `tol`.
pub(crate) fn matrix_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Definition of one edge for [`build_graph`].
#[derive(Debug, Clone)]
pub struct EdgeDef {
    pub label: String,
    pub from: String,
    pub to: String,
    pub length: f64,
}

impl EdgeDef {
    pub fn new(label: &str, from: &str, to: &str, length: f64) -> Self {
        Self {
            label: label.into(),
            from: from.into(),
            to: to.into(),
            length,
        }
    }
}

/// A connected metric graph with one validated condition per vertex.
///
/// Immutable after construction; cheap to share between threads.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertex_labels: Vec<String>,
    edges: Vec<Edge>,
    conditions: Vec<VertexCondition>,
    /// Incidence slots per vertex, in canonical order.
    slots: Vec<Vec<Slot>>,
}

/// Validates and assembles a metric graph.
///
/// Checks: every endpoint is declared, lengths are positive and finite, the
/// graph is connected, each condition has the dimension of the computed
/// vertex degree (a loop counts twice) and passes the self-adjointness check.
pub fn build_graph(
    vertex_labels: Vec<String>,
    edge_defs: Vec<EdgeDef>,
    mut conditions: HashMap<String, VertexCondition>,
) -> Result<MetricGraph> {
    if edge_defs.is_empty() {
        return Err(Error::InvalidGraph("edge list is empty".into()));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, label) in vertex_labels.iter().enumerate() {
        if index.insert(label.as_str(), i).is_some() {
            return Err(Error::InvalidGraph(format!("duplicate vertex `{label}`")));
        }
    }

    let mut edges = Vec::with_capacity(edge_defs.len());
    for def in &edge_defs {
        let from = *index.get(def.from.as_str()).ok_or_else(|| Error::UnknownVertex {
            edge: def.label.clone(),
            vertex: def.from.clone(),
        })?;
        let to = *index.get(def.to.as_str()).ok_or_else(|| Error::UnknownVertex {
            edge: def.label.clone(),
            vertex: def.to.clone(),
        })?;
        if !(def.length.is_finite() && def.length > 0.0) {
            return Err(Error::InvalidGraph(format!(
                "edge `{}` has non-positive length {}",
                def.label, def.length
            )));
        }
        edges.push(Edge {
            label: def.label.clone(),
            from: VertexId(from),
            to: VertexId(to),
            length: def.length,
        });
    }

    // Canonical slot order: by edge index, Start before End.
    let mut slots: Vec<Vec<Slot>> = vec![Vec::new(); vertex_labels.len()];
    for (e, edge) in edges.iter().enumerate() {
        slots[edge.from.0].push(Slot {
            edge: EdgeId(e),
            end: EdgeEnd::Start,
        });
        slots[edge.to.0].push(Slot {
            edge: EdgeId(e),
            end: EdgeEnd::End,
        });
    }
    for list in &mut slots {
        list.sort_by_key(|s| (s.edge.0, s.end == EdgeEnd::End));
    }

    // Connectivity over vertices through edges.
    let mut seen = vec![false; vertex_labels.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for slot in &slots[v] {
            let edge = &edges[slot.edge.0];
            let other = if edge.from.0 == v { edge.to.0 } else { edge.from.0 };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::DisconnectedGraph);
    }

    let mut bound = Vec::with_capacity(vertex_labels.len());
    for (v, label) in vertex_labels.iter().enumerate() {
        let cond = conditions.remove(label).ok_or_else(|| {
            Error::InvalidGraph(format!("no condition given for vertex `{label}`"))
        })?;
        let degree = slots[v].len();
        if cond.degree() != degree {
            return Err(Error::DimensionMismatch {
                vertex: label.clone(),
                condition: cond.degree(),
                degree,
            });
        }
        cond.validate().map_err(|defect| Error::InvalidCondition {
            vertex: label.clone(),
            defect,
        })?;
        bound.push(cond);
    }
    if let Some(extra) = conditions.keys().next() {
        return Err(Error::InvalidGraph(format!(
            "condition given for unknown vertex `{extra}`"
        )));
    }

    Ok(MetricGraph {
        vertex_labels,
        edges,
        conditions: bound,
        slots,
    })
}

impl MetricGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_label(&self, v: VertexId) -> &str {
        &self.vertex_labels[v.0]
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<VertexId> {
        self.vertex_labels.iter().position(|l| l == label).map(VertexId)
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_by_label(&self, label: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.label == label).map(EdgeId)
    }

    pub fn condition(&self, v: VertexId) -> &VertexCondition {
        &self.conditions[v.0]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.slots[v.0].len()
    }

    /// Incident slots at `v` in the row/column order of `(A_v, B_v)`.
    pub fn slots(&self, v: VertexId) -> &[Slot] {
        &self.slots[v.0]
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Two finite edges of length `edge_length` both oriented outward from a
    /// shared central vertex `A`, with the given condition at the centre and
    /// homogeneous Dirichlet conditions at the exterior vertices. This is the
    /// truncated model of two half-lines glued at a point.
    pub fn two_star(edge_length: f64, center: VertexCondition) -> Result<MetricGraph> {
        let mut conditions = HashMap::new();
        conditions.insert("A".to_string(), center);
        conditions.insert("B".to_string(), VertexCondition::dirichlet());
        conditions.insert("C".to_string(), VertexCondition::dirichlet());
        build_graph(
            vec!["A".into(), "B".into(), "C".into()],
            vec![
                EdgeDef::new("e1", "A", "B", edge_length),
                EdgeDef::new("e2", "A", "C", edge_length),
            ],
            conditions,
        )
    }

    /// Like [`two_star`](Self::two_star) but with the given condition at the
    /// exterior vertices instead of Dirichlet.
    pub fn two_star_with_exterior(
        edge_length: f64,
        center: VertexCondition,
        exterior: VertexCondition,
    ) -> Result<MetricGraph> {
        let mut conditions = HashMap::new();
        conditions.insert("A".to_string(), center);
        conditions.insert("B".to_string(), exterior.clone());
        conditions.insert("C".to_string(), exterior);
        build_graph(
            vec!["A".into(), "B".into(), "C".into()],
            vec![
                EdgeDef::new("e1", "A", "B", edge_length),
                EdgeDef::new("e2", "A", "C", edge_length),
            ],
            conditions,
        )
    }

    /// Recognizes the two-star shape: exactly two edges, both starting at a
    /// common central vertex. Returns the centre and the two edges in order.
    pub fn as_two_star(&self) -> Option<(VertexId, [EdgeId; 2])> {
        if self.edges.len() != 2 {
            return None;
        }
        let (e0, e1) = (&self.edges[0], &self.edges[1]);
        if e0.from == e1.from && e0.to != e0.from && e1.to != e1.from && e0.to != e1.to {
            Some((e0.from, [EdgeId(0), EdgeId(1)]))
        } else {
            None
        }
    }
}
