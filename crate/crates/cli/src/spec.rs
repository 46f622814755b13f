//! Experiment specification files (JSON).
//!
//! A spec names a graph file, a mesh, the flow parameters and optionally a
//! reference solution, a convergence ladder or qualitative checks:
//!
//! ```json
//! {
//!   "kind": "single_run",
//!   "graph_file": "../graphs/two_star_kirchhoff_L30.json",
//!   "mesh": { "nodes_per_edge": 800 },
//!   "flow": {
//!     "mass": 2.0, "dt": 0.01, "eps": 1e-10, "max_iterations": 3000,
//!     "nonlinearity": { "kind": "cubic_focusing" },
//!     "initial": { "kind": "gaussians",
//!                  "default": { "amplitude": 1.0, "width": 10.0, "sign": 1.0 } }
//!   },
//!   "reference": { "kind": "kirchhoff_soliton", "mass": 2.0 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory of the spec file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use grafflow_core::analytic::{
    delta_ground_state, delta_prime_states, kirchhoff_soliton, AnalyticState,
};
use grafflow_core::graph::MetricGraph;
use grafflow_core::mesh::{build_mesh, build_mesh_uniform_count, build_mesh_with_counts, Mesh};
use grafflow_core::{GaussianSpec, InitialDatum, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleRun,
    ConvergenceStudy,
    QualitativeChecks,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub graph_file: PathBuf,
    #[serde(default)]
    pub mesh: Option<MeshSpec>,
    pub flow: FlowSpec,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSpec>,
    #[serde(default)]
    pub checks: Option<ChecksSpec>,
    /// Output directory name; defaults to the spec file stem.
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Overrides applied by `--paper-scale`.
    #[serde(default)]
    pub paper: Option<PaperOverrides>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_edge: Option<usize>,
    /// Approximate total interior node budget, split by edge length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_edge: Option<HashMap<String, usize>>,
}

impl MeshSpec {
    pub fn build(&self, graph: &MetricGraph) -> Result<Mesh> {
        let chosen = [
            self.target_dx.is_some(),
            self.nodes_per_edge.is_some(),
            self.total_nodes.is_some(),
            self.per_edge.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if chosen != 1 {
            bail!("mesh spec must set exactly one of target_dx, nodes_per_edge, total_nodes, per_edge");
        }
        if let Some(dx) = self.target_dx {
            return Ok(build_mesh(graph, dx)?);
        }
        if let Some(n) = self.nodes_per_edge {
            return Ok(build_mesh_uniform_count(graph, n)?);
        }
        if let Some(total) = self.total_nodes {
            if total == 0 {
                bail!("total_nodes must be positive");
            }
            let dx = graph.total_length() / total as f64;
            return Ok(build_mesh(graph, dx)?);
        }
        let per_edge = self.per_edge.as_ref().unwrap();
        let mut counts = Vec::with_capacity(graph.num_edges());
        for edge in graph.edges() {
            let n = per_edge
                .get(&edge.label)
                .with_context(|| format!("no node count for edge `{}`", edge.label))?;
            counts.push(*n);
        }
        Ok(build_mesh_with_counts(graph, &counts)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub mass: f64,
    pub dt: f64,
    pub eps: f64,
    pub max_iterations: usize,
    pub nonlinearity: NonlinearitySpec,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    CubicFocusing,
    Power { sign: f64, exponent: f64 },
    DoublePower { p: f64, q: f64 },
}

impl NonlinearitySpec {
    pub fn instantiate(&self) -> Result<Nonlinearity> {
        Ok(match self {
            NonlinearitySpec::CubicFocusing => Nonlinearity::cubic_focusing(),
            NonlinearitySpec::Power { sign, exponent } => Nonlinearity::power(*sign, *exponent)?,
            NonlinearitySpec::DoublePower { p, q } => Nonlinearity::DoublePower { p: *p, q: *q },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianEntry {
    pub amplitude: f64,
    pub width: f64,
    pub sign: f64,
}

impl From<&GaussianEntry> for GaussianSpec {
    fn from(e: &GaussianEntry) -> Self {
        GaussianSpec {
            amplitude: e.amplitude,
            width: e.width,
            sign: e.sign,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    Gaussians {
        #[serde(default)]
        default: Option<GaussianEntry>,
        #[serde(default)]
        per_edge: HashMap<String, GaussianEntry>,
    },
    /// Reload a previously written field CSV as the initial datum.
    FieldFile { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    KirchhoffSoliton { mass: f64 },
    Delta { omega: f64, alpha: f64 },
    DeltaPrimeSymmetric { omega: f64, beta: f64 },
    DeltaPrimeAsymmetric { omega: f64, beta: f64 },
    FieldFile { path: PathBuf },
}

impl ReferenceSpec {
    /// Resolves to an analytic state where applicable.
    pub fn analytic(&self) -> Result<Option<AnalyticState>> {
        Ok(match self {
            ReferenceSpec::KirchhoffSoliton { mass } => Some(kirchhoff_soliton(*mass)?),
            ReferenceSpec::Delta { omega, alpha } => Some(delta_ground_state(*omega, *alpha)?),
            ReferenceSpec::DeltaPrimeSymmetric { omega, beta } => {
                Some(delta_prime_states(*omega, *beta)?.swap_remove(0))
            }
            ReferenceSpec::DeltaPrimeAsymmetric { omega, beta } => {
                let mut states = delta_prime_states(*omega, *beta)?;
                if states.len() < 2 {
                    bail!("no asymmetric state exists at omega = {omega}, beta = {beta}");
                }
                Some(states.swap_remove(1))
            }
            ReferenceSpec::FieldFile { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub dx_list: Vec<f64>,
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dx_list.len() < 3 {
            bail!(
                "convergence study needs at least 3 spacings, got {}",
                self.dx_list.len()
            );
        }
        if !self.dx_list.windows(2).all(|w| w[0] > w[1]) {
            bail!("convergence spacings must be strictly decreasing");
        }
        if self.dx_list.iter().any(|&dx| !(dx.is_finite() && dx > 0.0)) {
            bail!("convergence spacings must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    /// Vertex where the localized structure attaches to the main line.
    pub junction: String,
    /// Main-line edges, oriented outward from the junction.
    pub line_edges: Vec<String>,
    /// Edges expected to carry the maximum (loop/segment/bubbles).
    pub bump_edges: Vec<String>,
    /// The maximum may also sit on a line edge within this distance of the
    /// junction.
    pub max_junction_radius: f64,
    /// Monotone decay is required beyond this distance on the line edges.
    pub monotone_from: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperOverrides {
    #[serde(default)]
    pub graph_file: Option<PathBuf>,
    #[serde(default)]
    pub mesh: Option<MeshSpec>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec file {}", path.display()))?;
        let spec: ExperimentSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(spec)
    }

    pub fn initial_datum(&self, spec_dir: &Path) -> Result<InitialDatumSource> {
        Ok(match &self.flow.initial {
            InitialSpec::Gaussians { default, per_edge } => {
                InitialDatumSource::Gaussians(InitialDatum::Gaussians {
                    default: default.as_ref().map(GaussianSpec::from),
                    per_edge: per_edge
                        .iter()
                        .map(|(k, v)| (k.clone(), GaussianSpec::from(v)))
                        .collect(),
                })
            }
            InitialSpec::FieldFile { path } => InitialDatumSource::File(spec_dir.join(path)),
        })
    }
}

/// Initial datum either directly usable or needing a mesh-aware file load.
pub enum InitialDatumSource {
    Gaussians(InitialDatum),
    File(PathBuf),
}
