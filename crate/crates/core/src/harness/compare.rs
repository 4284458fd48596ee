use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dist_sq, SphereField};
use crate::flow::{run_flow, FlowConfig, FlowTrace, Scheme};
use crate::quadrature::{pairwise_sum, region_nodes, weighted_sum, Region};

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `(lambda, ||u_lambda - u||_{L^2(Q)})`.
    pub distances: Vec<(f64, f64)>,
    pub non_increasing: bool,
    pub strictly_decreasing: bool,
}

/// Space-time `L^2` distance between two traces sampled at the same times.
pub fn trace_l2_distance(a: &FlowTrace, b: &FlowTrace) -> Result<f64> {
    a.initial().ensure_compatible(b.initial())?;
    let ta = a.times();
    let tb = b.times();
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::GridMismatch("traces have different checkpoint times".into()));
    }
    let grid = a.grid();
    let nodes = region_nodes(grid, &Region::Domain);
    let w = a
        .time_weights(a.t_first(), a.t_last())
        .ok_or_else(|| Error::Precondition("traces span no time".into()))?;
    let slices: Vec<f64> = a
        .checkpoints
        .iter()
        .zip(&b.checkpoints)
        .zip(&w)
        .map(|((u, v), w)| w * weighted_sum(grid, &nodes, |i| dist_sq(u.at(i), v.at(i))))
        .collect();
    Ok(pairwise_sum(&slices).sqrt())
}

/// Runs the projected flow once and the penalized flow for every `lambda`
/// with the time stepping of `base`, and reports the `L^2(Q)` distances.
pub fn compare_glhf_hhf(u0: &SphereField, base: &FlowConfig, lambdas: &[f64]) -> Result<ComparisonReport> {
    let reference = run_flow(
        u0,
        &FlowConfig {
            scheme: Scheme::ProjectedHhf,
            ..base.clone()
        },
    )?;
    compare_against(&reference, u0, base, lambdas)
}

/// Same as [`compare_glhf_hhf`] with a precomputed projected-flow trace.
pub fn compare_against(
    reference: &FlowTrace,
    u0: &SphereField,
    base: &FlowConfig,
    lambdas: &[f64],
) -> Result<ComparisonReport> {
    reference.initial().ensure_compatible(u0)?;
    if let Some(f) = &reference.failure {
        return Err(Error::Precondition(format!("projected run failed: {}", f.message)));
    }
    let mut distances = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = FlowConfig {
            scheme: Scheme::Glhf,
            lambda,
            ..base.clone()
        };
        let tr = run_flow(u0, &cfg)?;
        if let Some(f) = &tr.failure {
            return Err(Error::Precondition(format!("GLHF run lambda = {lambda} failed: {}", f.message)));
        }
        distances.push((lambda, trace_l2_distance(&tr, reference)?));
    }
    let non_increasing = distances.windows(2).all(|w| w[1].1 <= w[0].1);
    let strictly_decreasing = distances.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ComparisonReport {
        distances,
        non_increasing,
        strictly_decreasing,
    })
}
