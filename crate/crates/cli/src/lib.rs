//! Experiment harness around `grafflow-core`: JSON experiment specs, flow
//! runs with CSV/JSON artifacts, convergence-order studies and qualitative
//! structure checks.

pub mod output;
pub mod runner;
pub mod spec;

pub use output::{CheckReport, ConvergenceReport, RunSummary};
pub use runner::{convergence_study, qualitative_checks, run_experiment, RunArtifacts, RunOptions};
pub use spec::{ExperimentKind, ExperimentSpec};
