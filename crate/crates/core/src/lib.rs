//! Finite-difference laboratory for sphere-valued harmonic map heat flows
//! and their Ginzburg-Landau penalization.

pub mod chart;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod quadrature;
pub mod stencil;

pub use chart::{from_chart, one_sided_monitor, to_chart, ChartField, OneSidedReport};
pub use error::{Error, Result};
pub use field::{ScalarField, SphereField};
pub use flow::{
    global_energy_check, glhf_step, hhf_projected_step, run_flow, weak_residual, FlowConfig,
    FlowTrace, Scheme, StepLog,
};
pub use grid::{build_grid, DomainGrid, DomainShape, DomainSpec, NodeClass};
pub use quadrature::{integrate, pairwise_sum, Region};
