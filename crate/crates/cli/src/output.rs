//! CSV and JSON artifacts.
//!
//! Field CSV schema: `edge,x,value`, one row per interior node, edges in
//! graph order, nodes inward from the edge start. On a two-edge star the
//! coordinate is signed for plot parity (first edge negative, second
//! positive); loaders go by row order, not by the coordinate.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use grafflow_core::flow::IterationRecord;
use grafflow_core::graph::{EdgeId, MetricGraph};
use grafflow_core::mesh::Mesh;

/// Signed plotting coordinate: negative on the first edge of a two-star.
fn plot_coordinate(graph: &MetricGraph, edge: EdgeId, x: f64) -> f64 {
    match graph.as_two_star() {
        Some((_, [first, _])) if edge == first => -x,
        _ => x,
    }
}

pub fn write_field_csv(
    path: &Path,
    graph: &MetricGraph,
    mesh: &Mesh,
    values: &[f64],
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "edge,x,value")?;
    for (e, k, idx) in mesh.nodes() {
        let x = plot_coordinate(graph, e, mesh.coordinate(e, k));
        writeln!(w, "{},{},{}", graph.edge(e).label, x, values[idx])?;
    }
    Ok(())
}

/// Reads a field CSV back over the given mesh. Rows must be grouped per edge
/// in graph order with the full interior node count each; coordinates are
/// ignored (row order is authoritative).
pub fn read_field_csv(path: &Path, graph: &MetricGraph, mesh: &Arc<Mesh>) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening field file {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(header)) if header.trim() == "edge,x,value" => {}
        _ => bail!("{}: missing `edge,x,value` header", path.display()),
    }
    let mut values = vec![0.0; mesh.total_nodes()];
    let mut expected = mesh.nodes();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (Some(edge), Some(_x), Some(value)) = (parts.next(), parts.next(), parts.next())
        else {
            bail!("{}:{}: expected 3 columns", path.display(), lineno + 2);
        };
        let Some((e, _k, idx)) = expected.next() else {
            bail!("{}: more rows than mesh nodes", path.display());
        };
        if graph.edge(e).label != edge {
            bail!(
                "{}:{}: expected edge `{}`, found `{}`",
                path.display(),
                lineno + 2,
                graph.edge(e).label,
                edge
            );
        }
        values[idx] = value
            .trim()
            .parse::<f64>()
            .with_context(|| format!("{}:{}: bad value", path.display(), lineno + 2))?;
    }
    if expected.next().is_some() {
        bail!("{}: fewer rows than mesh nodes", path.display());
    }
    Ok(values)
}

pub fn write_history_csv(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "iteration,energy,mass,chemical_potential,step_diff")?;
    for (n, rec) in history.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            n, rec.energy, rec.mass, rec.chemical_potential, rec.step_diff
        )?;
    }
    Ok(())
}

pub fn write_error_csv(
    path: &Path,
    graph: &MetricGraph,
    mesh: &Mesh,
    numeric: &[f64],
    reference: &[f64],
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "edge,x,abs_error")?;
    for (e, k, idx) in mesh.nodes() {
        let x = plot_coordinate(graph, e, mesh.coordinate(e, k));
        writeln!(
            w,
            "{},{},{}",
            graph.edge(e).label,
            x,
            (numeric[idx] - reference[idx]).abs()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_energy: f64,
    pub final_mass: f64,
    pub chemical_potential: f64,
    pub iterations: usize,
    pub termination: String,
    pub total_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linf_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_mass: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    /// Actual spacing realized on the first edge after rounding.
    pub realized_dx: f64,
    pub linf_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_order: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log(error) against log(dx).
    pub fitted_order: f64,
}

pub fn write_convergence_csv(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "dx,linf_error,local_order")?;
    for row in &report.rows {
        match row.local_order {
            Some(p) => writeln!(w, "{},{},{}", row.dx, row.linf_error, p)?,
            None => writeln!(w, "{},{},", row.dx, row.linf_error)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckViolation {
    pub edge: String,
    pub x: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    /// Global |ψ| maximum sits on a bump edge or within the junction radius.
    pub localization_ok: bool,
    pub max_edge: String,
    pub max_x: f64,
    pub max_value: f64,
    /// |ψ| decreases node-to-node along each line edge beyond the cutoff.
    pub monotone_ok: bool,
    pub violations: Vec<CheckViolation>,
    pub final_energy: f64,
    pub iterations: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.localization_ok && self.monotone_ok
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
