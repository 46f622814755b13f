//! Graph description files.
//!
//! A graph is described in JSON by its vertex labels, edge list and one
//! condition per vertex, either by name and parameters or through raw `A`/`B`
//! matrices (rows and columns in canonical slot order: incident edges by
//! their position in the edge list, start end before loop end):
//!
//! ```json
//! {
//!   "vertices": ["A", "B", "C"],
//!   "edges": [
//!     { "id": "e1", "from": "A", "to": "B", "length": 30.0 },
//!     { "id": "e2", "from": "A", "to": "C", "length": 30.0 }
//!   ],
//!   "conditions": {
//!     "A": { "kind": "delta", "alpha": -1.0 },
//!     "B": { "kind": "dirichlet" },
//!     "C": { "kind": "dirichlet" }
//!   }
//! }
//! ```

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, EdgeDef, MetricGraph, VertexCondition};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeEntry>,
    pub conditions: HashMap<String, ConditionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionSpec {
    Kirchhoff,
    Delta { alpha: f64 },
    DeltaPrime { beta: f64 },
    Dirichlet,
    Dipole { tau: f64 },
    Matrices { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl ConditionSpec {
    /// Instantiates the condition for a vertex of the given degree.
    pub fn instantiate(&self, degree: usize) -> Result<VertexCondition> {
        match self {
            ConditionSpec::Kirchhoff => VertexCondition::kirchhoff(degree),
            ConditionSpec::Delta { alpha } => VertexCondition::delta(degree, *alpha),
            ConditionSpec::DeltaPrime { beta } => VertexCondition::delta_prime(*beta),
            ConditionSpec::Dirichlet => Ok(VertexCondition::dirichlet()),
            ConditionSpec::Dipole { tau } => VertexCondition::dipole(*tau),
            ConditionSpec::Matrices { a, b } => {
                let to_matrix = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<f64>> {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::MalformedGraphFile(
                            "condition matrices must be square".into(),
                        ));
                    }
                    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
                };
                VertexCondition::from_matrices(to_matrix(a)?, to_matrix(b)?)
            }
        }
    }
}

impl GraphFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Validates the description and builds the graph. Degrees are computed
    /// from the incidence, so named conditions need no explicit dimension.
    pub fn build(&self) -> Result<MetricGraph> {
        // Count slots per vertex to size the named conditions.
        let mut degree: HashMap<&str, usize> = HashMap::new();
        for e in &self.edges {
            *degree.entry(e.from.as_str()).or_insert(0) += 1;
            *degree.entry(e.to.as_str()).or_insert(0) += 1;
        }
        let mut conditions = HashMap::new();
        for v in &self.vertices {
            let spec = self.conditions.get(v).ok_or_else(|| {
                Error::MalformedGraphFile(format!("no condition for vertex `{v}`"))
            })?;
            let d = degree.get(v.as_str()).copied().unwrap_or(0);
            if d == 0 {
                return Err(Error::MalformedGraphFile(format!(
                    "vertex `{v}` has no incident edges"
                )));
            }
            conditions.insert(v.clone(), spec.instantiate(d)?);
        }
        let edge_defs = self
            .edges
            .iter()
            .map(|e| EdgeDef::new(&e.id, &e.from, &e.to, e.length))
            .collect();
        build_graph(self.vertices.clone(), edge_defs, conditions)
    }
}

/// Loads and builds a graph from a JSON file.
pub fn load_graph(path: &Path) -> Result<MetricGraph> {
    GraphFile::load(path)?.build()
}
