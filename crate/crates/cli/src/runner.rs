//! Experiment drivers: single runs, convergence ladders, qualitative checks.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use grafflow_core::analytic::sample_on_mesh;
use grafflow_core::flow::{run_flow_assembled, FlowConfig, FlowResult, Termination};
use grafflow_core::graph::MetricGraph;
use grafflow_core::mesh::{build_mesh, GraphFunction, Mesh};
use grafflow_core::operator::{assemble_h, weighted_l2_values};

use crate::output::{
    read_field_csv, write_convergence_csv, write_error_csv, write_field_csv, write_history_csv,
    write_json, CheckReport, CheckViolation, ConvergenceReport, ConvergenceRow, RunSummary,
};
use crate::spec::{ExperimentKind, ExperimentSpec, InitialDatumSource, MeshSpec, ReferenceSpec};

/// Command-line level options applied on top of a spec.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root under which the experiment's output directory is created.
    pub out_root: PathBuf,
    pub paper_scale: bool,
    pub max_iterations: Option<usize>,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    /// Write the assembled operator in coordinate format.
    pub dump_operator: Option<PathBuf>,
}

impl RunOptions {
    pub fn with_out_root(root: impl Into<PathBuf>) -> Self {
        Self {
            out_root: root.into(),
            ..Default::default()
        }
    }
}

/// Everything a single run produced, for callers that inspect results
/// programmatically (the acceptance suite does).
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub summary: RunSummary,
    pub result: FlowResult,
    pub graph: MetricGraph,
    pub mesh: Arc<Mesh>,
    pub reference: Option<GraphFunction>,
}

/// The spec with CLI overrides folded in.
struct ResolvedSpec {
    graph_path: PathBuf,
    mesh: Option<MeshSpec>,
    flow: crate::spec::FlowSpec,
    spec: ExperimentSpec,
    spec_dir: PathBuf,
}

fn resolve(spec_path: &Path, opts: &RunOptions) -> Result<ResolvedSpec> {
    let spec = ExperimentSpec::load(spec_path)?;
    let spec_dir = spec_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut graph_file = spec.graph_file.clone();
    let mut mesh = spec.mesh.clone();
    let mut flow = spec.flow.clone();
    if opts.paper_scale {
        let paper = spec
            .paper
            .as_ref()
            .ok_or_else(|| anyhow!("--paper-scale given but the spec has no `paper` section"))?;
        if let Some(g) = &paper.graph_file {
            graph_file = g.clone();
        }
        if let Some(m) = &paper.mesh {
            mesh = Some(m.clone());
        }
        if let Some(n) = paper.max_iterations {
            flow.max_iterations = n;
        }
        if let Some(dt) = paper.dt {
            flow.dt = dt;
        }
        if let Some(eps) = paper.eps {
            flow.eps = eps;
        }
    }
    if let Some(n) = opts.max_iterations {
        flow.max_iterations = n;
    }
    if let Some(dt) = opts.dt {
        flow.dt = dt;
    }
    if let Some(eps) = opts.eps {
        flow.eps = eps;
    }

    let graph_path = spec_dir.join(&graph_file);
    if !graph_path.exists() {
        bail!("graph file {} does not exist", graph_path.display());
    }
    Ok(ResolvedSpec {
        graph_path,
        mesh,
        flow,
        spec,
        spec_dir,
    })
}

fn out_dir_for(spec_path: &Path, resolved: &ResolvedSpec, opts: &RunOptions) -> Result<PathBuf> {
    let name = resolved.spec.output_dir.clone().unwrap_or_else(|| {
        spec_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".to_string())
    });
    let dir = opts.out_root.join(name);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn flow_config(
    resolved: &ResolvedSpec,
    graph: &MetricGraph,
    mesh: &Arc<Mesh>,
) -> Result<(FlowConfig, GraphFunction)> {
    let nl = resolved.flow.nonlinearity.instantiate()?;
    let initial = match resolved.spec.initial_datum(&resolved.spec_dir)? {
        InitialDatumSource::Gaussians(datum) => datum.materialize(graph, mesh)?,
        InitialDatumSource::File(path) => {
            let values = read_field_csv(&path, graph, mesh)?;
            GraphFunction::from_values(mesh.clone(), values)?
        }
    };
    let config = FlowConfig {
        mass: resolved.flow.mass,
        dt: resolved.flow.dt,
        tolerance: resolved.flow.eps,
        max_iterations: resolved.flow.max_iterations,
        nonlinearity: nl,
        initial: grafflow_core::InitialDatum::Field(initial.values().to_vec()),
    };
    config.validate()?;
    Ok((config, initial))
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIterations => "max_iterations",
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Samples the symmetry orbit of an analytic state on the mesh.
///
/// Stationary states are unique only up to a phase (a sign, for real fields)
/// and up to graph automorphisms; on an equal-length two-star the edge swap
/// is such an automorphism and the symmetry-broken δ′ state can come out of
/// the flow on either edge. Comparisons minimize over `{±state, ±swap}`.
fn orbit_samples(
    state: &grafflow_core::analytic::AnalyticState,
    graph: &MetricGraph,
    mesh: &Arc<Mesh>,
) -> Result<Vec<GraphFunction>> {
    let mut candidates = vec![sample_on_mesh(state, graph, mesh)?];
    let swappable = graph.as_two_star().is_some()
        && graph.edges()[0].length == graph.edges()[1].length
        && mesh.count(grafflow_core::graph::EdgeId(0))
            == mesh.count(grafflow_core::graph::EdgeId(1));
    if swappable {
        let mut swapped = state.clone();
        swapped.profiles.reverse();
        candidates.push(sample_on_mesh(&swapped, graph, mesh)?);
    }
    for i in 0..candidates.len() {
        let mut neg = candidates[i].clone();
        neg.scale(-1.0);
        candidates.push(neg);
    }
    Ok(candidates)
}

fn closest_in_orbit(numeric: &[f64], candidates: Vec<GraphFunction>) -> GraphFunction {
    candidates
        .into_iter()
        .min_by(|a, b| linf(numeric, a.values()).total_cmp(&linf(numeric, b.values())))
        .expect("nonempty candidate set")
}

/// Resolves the reference to the orbit representative closest to `numeric`.
fn resolve_reference(
    reference: &ReferenceSpec,
    resolved: &ResolvedSpec,
    graph: &MetricGraph,
    mesh: &Arc<Mesh>,
    numeric: &[f64],
) -> Result<(GraphFunction, Option<f64>, Option<f64>)> {
    match reference {
        ReferenceSpec::FieldFile { path } => {
            let values = read_field_csv(&resolved.spec_dir.join(path), graph, mesh)?;
            Ok((GraphFunction::from_values(mesh.clone(), values)?, None, None))
        }
        other => {
            let state = other.analytic()?.expect("analytic reference");
            let best = closest_in_orbit(numeric, orbit_samples(&state, graph, mesh)?);
            Ok((best, Some(state.energy), Some(state.mass)))
        }
    }
}

/// Runs a single-flow experiment: writes `field.csv`, `energy_history.csv`,
/// `summary.json` and, when a reference is given, `error.csv`.
pub fn run_experiment(spec_path: &Path, opts: &RunOptions) -> Result<RunArtifacts> {
    let resolved = resolve(spec_path, opts)?;
    if resolved.spec.kind != ExperimentKind::SingleRun {
        bail!("`run` expects a single_run spec, got {:?}", resolved.spec.kind);
    }
    let out_dir = out_dir_for(spec_path, &resolved, opts)?;

    let graph = grafflow_core::io::load_graph(&resolved.graph_path)?;
    let mesh_spec = resolved
        .mesh
        .as_ref()
        .ok_or_else(|| anyhow!("single_run spec needs a mesh"))?;
    let mesh = Arc::new(mesh_spec.build(&graph)?);

    let (config, initial) = flow_config(&resolved, &graph, &mesh)?;
    let (h, trace_map) = assemble_h(&graph, &mesh)?;
    if let Some(dump) = &opts.dump_operator {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dump)?);
        h.dump_coordinates(&mut w)?;
    }
    let result = run_flow_assembled(&mesh, &h, &trace_map, &config, initial)?;

    write_field_csv(&out_dir.join("field.csv"), &graph, &mesh, result.field.values())?;
    write_history_csv(&out_dir.join("energy_history.csv"), &result.history)?;

    let mut reference_field = None;
    let mut linf_error = None;
    let mut l2_error = None;
    let mut reference_energy = None;
    let mut reference_mass = None;
    if let Some(reference) = &resolved.spec.reference {
        let (sampled, energy, mass) =
            resolve_reference(reference, &resolved, &graph, &mesh, result.field.values())?;
        write_error_csv(
            &out_dir.join("error.csv"),
            &graph,
            &mesh,
            result.field.values(),
            sampled.values(),
        )?;
        linf_error = Some(linf(result.field.values(), sampled.values()));
        let diff: Vec<f64> = result
            .field
            .values()
            .iter()
            .zip(sampled.values())
            .map(|(a, b)| a - b)
            .collect();
        l2_error = Some(weighted_l2_values(&diff, &mesh, &trace_map));
        reference_energy = energy;
        reference_mass = mass;
        reference_field = Some(sampled);
    }

    let last = result
        .history
        .last()
        .expect("history has at least the initial record");
    let summary = RunSummary {
        final_energy: last.energy,
        final_mass: last.mass,
        chemical_potential: last.chemical_potential,
        iterations: result.iterations,
        termination: termination_name(result.termination).to_string(),
        total_nodes: mesh.total_nodes(),
        linf_error,
        l2_error,
        reference_energy,
        reference_mass,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;

    Ok(RunArtifacts {
        out_dir,
        summary,
        result,
        graph,
        mesh,
        reference: reference_field,
    })
}

/// Runs the flow once per ladder spacing and fits the convergence order of
/// the L∞ error against the analytic reference.
pub fn convergence_study(spec_path: &Path, opts: &RunOptions) -> Result<ConvergenceReport> {
    let resolved = resolve(spec_path, opts)?;
    if resolved.spec.kind != ExperimentKind::ConvergenceStudy {
        bail!(
            "`converge` expects a convergence_study spec, got {:?}",
            resolved.spec.kind
        );
    }
    let ladder = resolved
        .spec
        .convergence
        .as_ref()
        .ok_or_else(|| anyhow!("convergence_study spec needs a `convergence` section"))?;
    ladder.validate()?;
    let reference = resolved
        .spec
        .reference
        .as_ref()
        .ok_or_else(|| anyhow!("convergence_study needs an analytic reference"))?;
    let state = reference
        .analytic()?
        .ok_or_else(|| anyhow!("convergence reference must be analytic, not a field file"))?;

    let out_dir = out_dir_for(spec_path, &resolved, opts)?;
    let graph = grafflow_core::io::load_graph(&resolved.graph_path)?;

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &dx in &ladder.dx_list {
        let mesh = Arc::new(build_mesh(&graph, dx)?);
        let (config, initial) = flow_config(&resolved, &graph, &mesh)?;
        let (h, trace_map) = assemble_h(&graph, &mesh)?;
        let result = run_flow_assembled(&mesh, &h, &trace_map, &config, initial)?;
        let sampled = closest_in_orbit(
            result.field.values(),
            orbit_samples(&state, &graph, &mesh)?,
        );
        let err = linf(result.field.values(), sampled.values());
        let local_order = rows.last().map(|prev: &ConvergenceRow| {
            (prev.linf_error / err).ln() / (prev.dx / dx).ln()
        });
        rows.push(ConvergenceRow {
            dx,
            realized_dx: mesh.spacing(grafflow_core::graph::EdgeId(0)),
            linf_error: err,
            local_order,
            iterations: result.iterations,
        });
    }

    let n = rows.len() as f64;
    let sx: f64 = rows.iter().map(|r| r.dx.ln()).sum();
    let sy: f64 = rows.iter().map(|r| r.linf_error.ln()).sum();
    let sxx: f64 = rows.iter().map(|r| r.dx.ln().powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| r.dx.ln() * r.linf_error.ln()).sum();
    let fitted_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    let report = ConvergenceReport { rows, fitted_order };
    write_convergence_csv(&out_dir.join("convergence.csv"), &report)?;
    write_json(&out_dir.join("summary.json"), &report)?;
    Ok(report)
}

/// Runs the flow and checks the qualitative structure of the state:
/// localization of the maximum and monotone decay along the main line.
pub fn qualitative_checks(spec_path: &Path, opts: &RunOptions) -> Result<CheckReport> {
    let resolved = resolve(spec_path, opts)?;
    if resolved.spec.kind != ExperimentKind::QualitativeChecks {
        bail!(
            "`check` expects a qualitative_checks spec, got {:?}",
            resolved.spec.kind
        );
    }
    let checks = resolved
        .spec
        .checks
        .as_ref()
        .ok_or_else(|| anyhow!("qualitative_checks spec needs a `checks` section"))?;
    let out_dir = out_dir_for(spec_path, &resolved, opts)?;

    let graph = grafflow_core::io::load_graph(&resolved.graph_path)?;
    let junction = graph
        .vertex_by_label(&checks.junction)
        .ok_or_else(|| anyhow!("junction vertex `{}` not in graph", checks.junction))?;
    for label in checks.line_edges.iter().chain(&checks.bump_edges) {
        if graph.edge_by_label(label).is_none() {
            bail!("check edge `{label}` not in graph");
        }
    }
    for label in &checks.line_edges {
        let e = graph.edge_by_label(label).unwrap();
        if graph.edge(e).from != junction {
            bail!("line edge `{label}` must be oriented away from the junction");
        }
    }

    let mesh_spec = resolved
        .mesh
        .as_ref()
        .ok_or_else(|| anyhow!("qualitative_checks spec needs a mesh"))?;
    let mesh = Arc::new(mesh_spec.build(&graph)?);
    let (config, initial) = flow_config(&resolved, &graph, &mesh)?;
    let (h, trace_map) = assemble_h(&graph, &mesh)?;
    let result = run_flow_assembled(&mesh, &h, &trace_map, &config, initial)?;

    write_field_csv(&out_dir.join("field.csv"), &graph, &mesh, result.field.values())?;
    write_history_csv(&out_dir.join("energy_history.csv"), &result.history)?;

    // Global maximum of |ψ|.
    let values = result.field.values();
    let mut max_value = 0.0f64;
    let mut max_edge = grafflow_core::graph::EdgeId(0);
    let mut max_k = 1;
    for (e, k, idx) in mesh.nodes() {
        if values[idx].abs() > max_value {
            max_value = values[idx].abs();
            max_edge = e;
            max_k = k;
        }
    }
    let max_label = graph.edge(max_edge).label.clone();
    let max_x = mesh.coordinate(max_edge, max_k);
    let localization_ok = checks.bump_edges.contains(&max_label)
        || (checks.line_edges.contains(&max_label) && max_x <= checks.max_junction_radius);

    // Monotone decay node-to-node beyond the cutoff, with a rounding slack
    // relative to the field scale.
    let slack = 1e-12 * max_value;
    let mut violations = Vec::new();
    for label in &checks.line_edges {
        let e = graph.edge_by_label(label).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=mesh.count(e) {
            let x = mesh.coordinate(e, k);
            if x < checks.monotone_from {
                continue;
            }
            let v = values[mesh.node_index(e, k)].abs();
            if v > prev + slack {
                violations.push(CheckViolation {
                    edge: label.clone(),
                    x,
                    detail: format!("|ψ| rises from {prev:.6e} to {v:.6e}"),
                });
            }
            prev = v;
        }
    }
    let monotone_ok = violations.is_empty();

    let report = CheckReport {
        localization_ok,
        max_edge: max_label,
        max_x,
        max_value,
        monotone_ok,
        violations,
        final_energy: result.history.last().unwrap().energy,
        iterations: result.iterations,
    };
    write_json(&out_dir.join("checks.json"), &report)?;
    Ok(report)
}
