//! Computation of stationary states (fixed-mass energy minimizers) of
//! nonlinear Schrödinger equations on metric graphs.
//!
//! The pieces, bottom up:
//!
//! * [`graph`] — metric graphs and self-adjoint vertex conditions `(A, B)`;
//! * [`mesh`] — uniform interior grids per edge and fields over them;
//! * [`operator`] — vertex trace elimination and assembly of the sparse
//!   second-order operator `[H] ≈ -Δ`, plus the trace-inclusive trapezoidal
//!   inner products;
//! * [`solver`] — sparse direct factorization for the semi-implicit steps;
//! * [`flow`] — the normalized gradient flow: backward Euler step, mass
//!   renormalization, energy/chemical-potential diagnostics;
//! * [`analytic`] — closed-form reference states on the two-edge star;
//! * [`io`] — JSON graph descriptions.

pub mod analytic;
pub mod error;
pub mod flow;
pub mod graph;
pub mod io;
pub mod mesh;
pub mod nonlinearity;
pub mod operator;
pub mod solver;

pub use error::{Error, Result};
pub use flow::{
    befd_step, chemical_potential, discrete_energy, run_flow, stationarity_residual, FlowConfig,
    FlowResult, GaussianSpec, InitialDatum, IterationRecord, Termination,
};
pub use graph::{build_graph, EdgeDef, EdgeEnd, EdgeId, MetricGraph, VertexCondition, VertexId};
pub use mesh::{build_mesh, build_mesh_uniform_count, build_mesh_with_counts, GraphFunction, Mesh};
pub use nonlinearity::Nonlinearity;
pub use operator::{
    assemble_h, reconstruct_traces, trace_coefficients, weighted_dot, weighted_norms,
    SparseOperator, TraceMap, WeightedNorms,
};
pub use solver::{solve_linear, SparseLu};
