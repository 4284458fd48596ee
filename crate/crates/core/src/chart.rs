//! Stereographic chart from the south pole and the hemisphere monitor.
//!
//! `u' = 2v / (1 + |v|^2)`, `u_last = (1 - |v|^2) / (1 + |v|^2)`, inverted by
//! `v = u' / (1 + u_last)`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{norm, SphereField};
use crate::flow::FlowTrace;
use crate::grid::DomainGrid;

/// Nodes whose last component is at or below `-1 + CHART_MARGIN` are outside the chart.
pub const CHART_MARGIN: f64 = 1e-6;

/// Default confinement threshold for [`one_sided_monitor`].
pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct ChartField {
    grid: Arc<DomainGrid>,
    dim: usize,
    values: Vec<f64>,
    pub t: f64,
}

impl ChartField {
    pub fn from_values(grid: Arc<DomainGrid>, dim: usize, values: Vec<f64>, t: f64) -> Result<Self> {
        if dim == 0 || values.len() != grid.node_count() * dim {
            return Err(Error::GridMismatch(format!(
                "{} chart values for {} nodes x {dim}",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, dim, values, t })
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    /// Chart dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest `|v|` over interior and boundary nodes.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.node_count())
            .filter(|&i| self.grid.is_active(i))
            .map(|i| norm(self.at(i)))
            .fold(0.0, f64::max)
    }
}

/// Chart coordinates of every node. Exterior nodes are mapped too, so the
/// precondition applies to all nodes.
pub fn to_chart(u: &SphereField) -> Result<ChartField> {
    let k = u.ncomp();
    if k < 2 {
        return Err(Error::Precondition("chart needs a target sphere of dimension >= 1".into()));
    }
    let dim = k - 1;
    let mut values = Vec::with_capacity(u.grid().node_count() * dim);
    for node in 0..u.grid().node_count() {
        let p = u.at(node);
        let last = p[dim];
        if !(last > -1.0 + CHART_MARGIN) {
            return Err(Error::ChartDomain { node, last });
        }
        let s = 1.0 + last;
        values.extend(p[..dim].iter().map(|x| x / s));
    }
    ChartField::from_values(u.grid_arc().clone(), dim, values, u.t)
}

pub fn from_chart(v: &ChartField) -> Result<SphereField> {
    if let Some(pos) = v.values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { node: pos / v.dim });
    }
    let k = v.dim + 1;
    let mut values = Vec::with_capacity(v.grid.node_count() * k);
    for node in 0..v.grid.node_count() {
        let w = v.at(node);
        let r2: f64 = w.iter().map(|x| x * x).sum();
        let s = 1.0 + r2;
        values.extend(w.iter().map(|x| 2.0 * x / s));
        values.push((1.0 - r2) / s);
    }
    SphereField::from_values(v.grid.clone(), k, values, v.t)
}

/// Sup of `|v|` over active nodes after normalizing `u` node-wise, or `None`
/// if some active node is outside the chart.
pub fn sup_chart_norm(u: &SphereField) -> Option<f64> {
    let grid = u.grid();
    let last = u.ncomp() - 1;
    let mut sup = 0.0f64;
    for node in 0..grid.node_count() {
        if !grid.is_active(node) {
            continue;
        }
        let p = u.at(node);
        let r = norm(p);
        if r == 0.0 {
            return None;
        }
        let l = p[last] / r;
        if !(l > -1.0 + CHART_MARGIN) {
            return None;
        }
        let tangential = norm(&p[..last]) / r;
        sup = sup.max(tangential / (1.0 + l));
    }
    Some(sup)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorSlice {
    pub t: f64,
    pub min_last: f64,
    pub sup_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OneSidedReport {
    pub delta: f64,
    pub initial_sup_v: f64,
    pub tolerance: f64,
    pub slices: Vec<MonitorSlice>,
    /// Time of the first slice with `sup_v > initial_sup_v + tolerance`.
    pub first_violation: Option<f64>,
    /// Largest `sup_v(t) - sup_v(s)` over slices `s < t`.
    pub max_increase: f64,
    /// Some slice left the chart or went non-finite.
    pub blow_up: bool,
}

impl OneSidedReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none() && !self.blow_up
    }
}

/// Checks that the image stays in the upper hemisphere and that `sup |v|`
/// never exceeds its initial value by more than `1e-6 + c (dt + h^2)`.
pub fn one_sided_monitor(trace: &FlowTrace, delta: f64, c: f64) -> Result<OneSidedReport> {
    let u0 = trace.initial();
    let m0 = u0.min_last();
    if !(m0 >= delta) {
        return Err(Error::Precondition(format!(
            "initial data not hemisphere-confined: min last component {m0} < delta = {delta}"
        )));
    }
    let h = trace.grid().h();
    let tolerance = 1e-6 + c * (trace.config.dt + h * h);
    let mut slices = Vec::with_capacity(trace.checkpoints.len());
    let mut blow_up = false;
    for u in &trace.checkpoints {
        match (u.check_finite(), sup_chart_norm(u)) {
            (Ok(()), Some(sup_v)) => slices.push(MonitorSlice {
                t: u.t,
                min_last: u.min_last(),
                sup_v,
            }),
            _ => {
                blow_up = true;
                break;
            }
        }
    }
    let initial_sup_v = slices[0].sup_v;
    let first_violation = slices
        .iter()
        .find(|s| s.sup_v > initial_sup_v + tolerance)
        .map(|s| s.t);
    let mut max_increase = 0.0f64;
    let mut running_min = f64::INFINITY;
    for s in &slices {
        max_increase = max_increase.max(s.sup_v - running_min);
        running_min = running_min.min(s.sup_v);
    }
    Ok(OneSidedReport {
        delta,
        initial_sup_v,
        tolerance,
        slices,
        first_violation,
        max_increase,
        blow_up,
    })
}
