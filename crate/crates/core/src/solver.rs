//! Sparse direct solver for the semi-implicit step systems.
//!
//! The matrices are tridiagonal inside each edge with a handful of coupling
//! entries near the vertices, so Gaussian elimination with partial pivoting
//! produces only local fill-in: rows stay short and the factorization is
//! O(N) for graph-structured operators. Rows are kept as sorted sparse
//! vectors; a per-column bucket list tracks candidate pivot rows.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::operator::{weighted_l2_values, SparseOperator, TraceMap};

/// Relative residual accepted from a direct solve.
const RESIDUAL_TOL: f64 = 1e-10;

type Row = Vec<(usize, f64)>;

/// PA = LU factorization with row pivoting.
pub struct SparseLu {
    n: usize,
    /// Pivot row chosen at each elimination step.
    pivot_rows: Vec<usize>,
    /// Multipliers applied at each step: (target row, multiplier).
    multipliers: Vec<Vec<(usize, f64)>>,
    /// Upper-triangular rows (column ≥ step index), sorted by column.
    upper: Vec<Row>,
}

fn row_value(row: &Row, col: usize) -> Option<f64> {
    row.binary_search_by_key(&col, |&(c, _)| c)
        .ok()
        .map(|i| row[i].1)
}

fn row_remove(row: &mut Row, col: usize) {
    if let Ok(i) = row.binary_search_by_key(&col, |&(c, _)| c) {
        row.remove(i);
    }
}

/// `target -= m * source`, skipping `skip_col` (eliminated exactly).
/// Returns the columns newly introduced into `target`.
fn row_axpy(target: &mut Row, m: f64, source: &Row, skip_col: usize, new_cols: &mut Vec<usize>) {
    let mut merged = Vec::with_capacity(target.len() + source.len());
    let mut ti = 0;
    for &(c, v) in source.iter() {
        if c == skip_col {
            continue;
        }
        while ti < target.len() && target[ti].0 < c {
            merged.push(target[ti]);
            ti += 1;
        }
        if ti < target.len() && target[ti].0 == c {
            let nv = target[ti].1 - m * v;
            ti += 1;
            if nv != 0.0 {
                merged.push((c, nv));
            }
        } else {
            let nv = -m * v;
            if nv != 0.0 {
                merged.push((c, nv));
                new_cols.push(c);
            }
        }
    }
    merged.extend_from_slice(&target[ti..]);
    *target = merged;
}

impl SparseLu {
    pub fn factor(matrix: &SparseOperator) -> Result<Self> {
        let n = matrix.size();
        let mut rows: Vec<Row> = (0..n).map(|i| matrix.row(i).collect()).collect();
        let mut scale = 0.0f64;
        for row in &rows {
            for &(_, v) in row {
                scale = scale.max(v.abs());
            }
        }
        if scale == 0.0 {
            return Err(Error::LinearSolveFailure("matrix is zero".into()));
        }
        let pivot_floor = scale * 1e-300_f64.max(f64::EPSILON * 1e-3);

        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                buckets[c].push(i);
            }
        }

        let mut active = vec![true; n];
        let mut pivot_rows = Vec::with_capacity(n);
        let mut multipliers = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut new_cols = Vec::new();

        for k in 0..n {
            // Pick the largest-magnitude entry in column k among active rows.
            let mut pivot = usize::MAX;
            let mut best = 0.0f64;
            for &r in &buckets[k] {
                if !active[r] {
                    continue;
                }
                if let Some(v) = row_value(&rows[r], k) {
                    if v.abs() > best {
                        best = v.abs();
                        pivot = r;
                    }
                }
            }
            if pivot == usize::MAX || best <= pivot_floor {
                return Err(Error::LinearSolveFailure(format!(
                    "singular system at elimination step {k}"
                )));
            }
            active[pivot] = false;
            let pivot_row = std::mem::take(&mut rows[pivot]);
            let pivot_val = row_value(&pivot_row, k).unwrap();

            let candidates: Vec<usize> = buckets[k]
                .iter()
                .copied()
                .filter(|&r| active[r])
                .collect();
            let mut mults = Vec::new();
            for r in candidates {
                let Some(a) = row_value(&rows[r], k) else {
                    continue; // stale bucket entry
                };
                let m = a / pivot_val;
                row_remove(&mut rows[r], k);
                new_cols.clear();
                row_axpy(&mut rows[r], m, &pivot_row, k, &mut new_cols);
                for &c in &new_cols {
                    buckets[c].push(r);
                }
                mults.push((r, m));
            }
            pivot_rows.push(pivot);
            multipliers.push(mults);
            upper.push(pivot_row);
        }

        Ok(Self {
            n,
            pivot_rows,
            multipliers,
            upper,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let mut b = rhs.to_vec();
        for k in 0..self.n {
            let v = b[self.pivot_rows[k]];
            if v != 0.0 {
                for &(r, m) in &self.multipliers[k] {
                    b[r] -= m * v;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for k in (0..self.n).rev() {
            let mut acc = b[self.pivot_rows[k]];
            let row = &self.upper[k];
            let mut diag = 0.0;
            for &(c, v) in row {
                if c == k {
                    diag = v;
                } else {
                    acc -= v * x[c];
                }
            }
            x[k] = acc / diag;
        }
        x
    }
}

/// Factors and solves `matrix · x = rhs`, then verifies the weighted residual
/// `‖matrix·x - rhs‖_w ≤ 1e-10 ‖rhs‖_w`.
pub fn solve_linear(
    matrix: &SparseOperator,
    rhs: &[f64],
    mesh: &Mesh,
    trace_map: &TraceMap,
) -> Result<Vec<f64>> {
    let lu = SparseLu::factor(matrix)?;
    let x = lu.solve(rhs);
    let mut residual = matrix.apply(&x);
    for (r, b) in residual.iter_mut().zip(rhs) {
        *r -= b;
    }
    let rnorm = weighted_l2_values(&residual, mesh, trace_map);
    let bnorm = weighted_l2_values(rhs, mesh, trace_map);
    if !rnorm.is_finite() || rnorm > RESIDUAL_TOL * bnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::LinearSolveFailure(format!(
            "residual {rnorm:.3e} exceeds {RESIDUAL_TOL:.0e} × ‖rhs‖ = {:.3e}",
            RESIDUAL_TOL * bnorm
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{MetricGraph, VertexCondition};
    use crate::mesh::build_mesh_uniform_count;
    use crate::operator::assemble_h;
    use nalgebra::{DMatrix, DVector};

    fn dense_solve(m: &SparseOperator, rhs: &[f64]) -> Vec<f64> {
        let a = m.to_dense();
        let b = DVector::from_column_slice(rhs);
        a.lu().solve(&b).expect("dense solve").iter().copied().collect()
    }

    #[test]
    fn identity_system_returns_rhs() {
        let rows = (0..4).map(|i| vec![(i, 1.0)]).collect();
        let m = SparseOperator::from_rows(rows);
        let lu = SparseLu::factor(&m).unwrap();
        let x = lu.solve(&[1.0, -2.0, 3.5, 0.0]);
        assert_eq!(x, vec![1.0, -2.0, 3.5, 0.0]);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let g = {
            let mut conditions = std::collections::HashMap::new();
            conditions.insert("A".to_string(), VertexCondition::dirichlet());
            conditions.insert("B".to_string(), VertexCondition::dirichlet());
            crate::graph::build_graph(
                vec!["A".into(), "B".into()],
                vec![crate::graph::EdgeDef::new("e", "A", "B", 1.0)],
                conditions,
            )
            .unwrap()
        };
        let mesh = build_mesh_uniform_count(&g, 3).unwrap();
        let (h, _) = assemble_h(&g, &mesh).unwrap();
        let rhs = [1.0, 2.0, -1.0];
        let lu = SparseLu::factor(&h).unwrap();
        let x = lu.solve(&rhs);
        let xd = dense_solve(&h, &rhs);
        for (a, b) in x.iter().zip(&xd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_two_star_matches_dense() {
        let g = MetricGraph::two_star(1.0, VertexCondition::kirchhoff(2).unwrap()).unwrap();
        let mesh = build_mesh_uniform_count(&g, 3).unwrap();
        let (h, tm) = assemble_h(&g, &mesh).unwrap();
        // Shifted system resembling a flow step matrix.
        let mut m = h.clone();
        let diag = m.diagonal_indices();
        {
            let vals = m.values_mut();
            for v in vals.iter_mut() {
                *v *= 0.01;
            }
            for &d in &diag {
                vals[d] += 1.0;
            }
        }
        let rhs = [0.3, -0.1, 0.7, 0.2, 0.9, -0.4];
        let x = solve_linear(&m, &rhs, &mesh, &tm).unwrap();
        let xd = dense_solve(&m, &rhs);
        for (a, b) in x.iter().zip(&xd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let rows = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        let m = SparseOperator::from_rows(rows);
        assert!(matches!(
            SparseLu::factor(&m),
            Err(Error::LinearSolveFailure(_))
        ));
    }

    #[test]
    fn random_pattern_matches_dense() {
        // Deterministic pseudo-random small dense-ish system.
        let n = 9;
        let mut state = 0x12345678u64;
        let mut rand = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let mut dense = DMatrix::zeros(n, n);
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let r = rand();
                if i == j || r.abs() > 0.35 {
                    let v = if i == j { 3.0 + r } else { r };
                    dense[(i, j)] = v;
                    rows[i].push((j, v));
                }
            }
        }
        let m = SparseOperator::from_rows(rows);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let lu = SparseLu::factor(&m).unwrap();
        let x = lu.solve(&rhs);
        let xd = dense_solve(&m, &rhs);
        for (a, b) in x.iter().zip(&xd) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
