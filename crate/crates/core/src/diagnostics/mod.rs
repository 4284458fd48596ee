//! Quantities entering the regularity estimates, evaluated on flow traces.

mod density;
mod energy;
mod kernel;
mod monotonicity;
mod poincare;
mod report;

pub use density::{
    epsilon_regularity_report, g_radius, holder_time_modulus, scaled_energy_density,
    singular_set, EpsilonRegularityReport, HolderReport, RegularityAnchor, SingularCandidateSet,
};
pub use energy::{
    energy_density, penalty_decay_exponent, penalty_integral, EnergyDensityField,
};
pub use kernel::{kernel_weighted_energy, scaled_kernel_energy, BackwardKernel};
pub use monotonicity::{
    monotonicity_check, AnchorKind, MonotonicityOptions, MonotonicityReport,
};
pub use poincare::{
    hybrid_check, reverse_poincare_check, HybridReport, MeanTarget, ReversePoincareReport,
};
pub use report::ReportRecord;

use crate::error::{Error, Result};
use crate::flow::FlowTrace;
use crate::quadrature::{region_nodes, Region};

/// Non-zero time weights `(checkpoint, weight)` for `∫_a^b dt`, clipped to the trace.
pub(crate) fn slab_weights(trace: &FlowTrace, a: f64, b: f64) -> Option<Vec<(usize, f64)>> {
    let w = trace.time_weights(a, b)?;
    let out: Vec<(usize, f64)> = w
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .collect();
    (!out.is_empty()).then_some(out)
}

/// Weighted nodes of `B_R(x0) ∩ Ω` and the time weights of `(t0 - R^2, t0 + R^2)`.
pub(crate) fn cylinder(
    trace: &FlowTrace,
    t0: f64,
    x0: &[f64],
    r: f64,
) -> Result<(Vec<usize>, Vec<(usize, f64)>)> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Precondition(format!("cylinder radius {r} must be positive")));
    }
    if x0.len() != trace.grid().dim() {
        return Err(Error::Precondition(format!(
            "anchor has {} coordinates, domain dimension is {}",
            x0.len(),
            trace.grid().dim()
        )));
    }
    let nodes = region_nodes(trace.grid(), &Region::ball(x0, r));
    if nodes.is_empty() {
        return Err(Error::EmptyRegion(format!("B_{r}({x0:?}) contains no weighted node")));
    }
    let times = slab_weights(trace, t0 - r * r, t0 + r * r).ok_or_else(|| {
        Error::EmptyRegion(format!(
            "time window ({}, {}) misses the trace [{}, {}]",
            t0 - r * r,
            t0 + r * r,
            trace.t_first(),
            trace.t_last()
        ))
    })?;
    Ok((nodes, times))
}
