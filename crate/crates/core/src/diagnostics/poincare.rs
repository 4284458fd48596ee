use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dist_sq, SphereField};
use crate::flow::FlowTrace;
use crate::quadrature::{pairwise_sum, weighted_sum};
use crate::stencil::intrinsic_gradient_sq;

use super::cylinder;
use super::energy::energy_density;
use super::report::ReportRecord;

/// Choice of `a(t)` in the oscillation term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MeanTarget {
    /// Spatial mean of `u(t)` over `B_2R(x0) ∩ Ω`.
    SpatialMean,
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct ReversePoincareReport {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub r: f64,
    pub target: MeanTarget,
    /// `∫_{P_R} |grad u|^2`.
    pub lhs: f64,
    /// `R^-2 ∫_{P_2R} |u - a|^2`.
    pub oscillation: f64,
    /// `∫_{P_2R} |grad u0|^2`.
    pub initial_energy: f64,
    pub rhs: f64,
    /// `lhs / rhs` (0 when both vanish).
    pub fitted_c: f64,
}

impl ReversePoincareReport {
    pub fn record(&self) -> ReportRecord {
        let mut z0 = vec![self.t0];
        z0.extend(&self.x0);
        ReportRecord {
            kind: "reverse_poincare".into(),
            z0,
            r: self.r,
            lhs: self.lhs,
            rhs: self.rhs,
            defect: None,
            fitted_c: self.fitted_c,
        }
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

pub fn reverse_poincare_check(
    trace: &FlowTrace,
    t0: f64,
    x0: &[f64],
    r: f64,
    target: &MeanTarget,
) -> Result<ReversePoincareReport> {
    let (inner, inner_t) = cylinder(trace, t0, x0, r)?;
    let (outer, outer_t) = cylinder(trace, t0, x0, 2.0 * r)?;
    let grid = trace.grid();
    let ncomp = trace.initial().ncomp();
    if let MeanTarget::Constant(a) = target {
        if a.len() != ncomp {
            return Err(Error::Precondition("a(t) has the wrong number of components".into()));
        }
    }

    let lhs = pairwise_sum(
        &inner_t
            .iter()
            .map(|&(k, w)| {
                let g = intrinsic_gradient_sq(&trace.checkpoints[k]);
                w * weighted_sum(grid, &inner, |i| g.get(i))
            })
            .collect::<Vec<_>>(),
    );
    let volume = weighted_sum(grid, &outer, |_| 1.0);
    let osc = pairwise_sum(
        &outer_t
            .iter()
            .map(|&(k, w)| {
                let u = &trace.checkpoints[k];
                let a = match target {
                    MeanTarget::SpatialMean => (0..ncomp)
                        .map(|c| weighted_sum(grid, &outer, |i| u.at(i)[c]) / volume)
                        .collect(),
                    MeanTarget::Constant(a) => a.clone(),
                };
                w * weighted_sum(grid, &outer, |i| dist_sq(u.at(i), &a))
            })
            .collect::<Vec<_>>(),
    ) / (r * r);
    let g0 = intrinsic_gradient_sq(trace.initial());
    let span: f64 = outer_t.iter().map(|p| p.1).sum();
    let initial_energy = span * weighted_sum(grid, &outer, |i| g0.get(i));
    let rhs = osc + initial_energy;
    Ok(ReversePoincareReport {
        t0,
        x0: x0.to_vec(),
        r,
        target: target.clone(),
        lhs,
        oscillation: osc,
        initial_energy,
        rhs,
        fitted_c: ratio(lhs, rhs),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridReport {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub r: f64,
    /// `∫_{P_R} e`.
    pub lhs: f64,
    /// `∫_{P_2R} e`, split into gradient and penalty parts.
    pub energy_2r: f64,
    pub gradient_part: f64,
    pub penalty_part: f64,
    /// `R^-2 ∫_{P_2R} |u - h0|^2`.
    pub oscillation: f64,
    /// `∫_{P_2R} |grad h0|^2`.
    pub harmonic: f64,
    /// `(eps0, C(eps0))` with `C(eps0) = max(0, lhs - eps0 energy_2r - harmonic) / oscillation`.
    pub constants: Vec<(f64, f64)>,
    /// Penalty energy exceeds gradient energy on `P_2R`.
    pub pre_asymptotic: bool,
}

impl HybridReport {
    pub fn records(&self) -> Vec<ReportRecord> {
        let mut z0 = vec![self.t0];
        z0.extend(&self.x0);
        self.constants
            .iter()
            .map(|&(eps, c)| ReportRecord {
                kind: format!("hybrid eps0={eps}"),
                z0: z0.clone(),
                r: self.r,
                lhs: self.lhs,
                rhs: eps * self.energy_2r + c * self.oscillation + self.harmonic,
                defect: None,
                fitted_c: c,
            })
            .collect()
    }
}

/// Evaluates every term of the hybrid inequality at a boundary anchor.
pub fn hybrid_check(
    trace: &FlowTrace,
    t0: f64,
    x0: &[f64],
    r: f64,
    eps0: &[f64],
    h0: &SphereField,
) -> Result<HybridReport> {
    let grid = trace.grid();
    h0.ensure_compatible(trace.initial())?;
    if x0.len() != grid.dim() {
        return Err(Error::Precondition("anchor dimension mismatch".into()));
    }
    let dist = grid.distance_to_boundary(x0);
    if dist > grid.h() * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!(
            "hybrid anchor is {dist} from the boundary, more than h = {}",
            grid.h()
        )));
    }
    let (inner, inner_t) = cylinder(trace, t0, x0, r)?;
    let (outer, outer_t) = cylinder(trace, t0, x0, 2.0 * r)?;
    let mut lhs = 0.0;
    for &(k, w) in &inner_t {
        let e = energy_density(&trace.checkpoints[k], &trace.config)?;
        lhs += w * weighted_sum(grid, &inner, |i| e.get(i));
    }
    let mut gradient_part = 0.0;
    let mut penalty_part = 0.0;
    let mut osc = 0.0;
    for &(k, w) in &outer_t {
        let u = &trace.checkpoints[k];
        let e = energy_density(u, &trace.config)?;
        gradient_part += w * weighted_sum(grid, &outer, |i| e.gradient.get(i));
        penalty_part += w * weighted_sum(grid, &outer, |i| e.penalty.get(i));
        osc += w * weighted_sum(grid, &outer, |i| dist_sq(u.at(i), h0.at(i)));
    }
    osc /= r * r;
    let gh = crate::stencil::gradient_norm_sq(h0);
    let span: f64 = outer_t.iter().map(|p| p.1).sum();
    let harmonic = span * weighted_sum(grid, &outer, |i| gh.get(i));
    let energy_2r = gradient_part + penalty_part;
    let constants = eps0
        .iter()
        .map(|&eps| (eps, ratio((lhs - eps * energy_2r - harmonic).max(0.0), osc)))
        .collect();
    Ok(HybridReport {
        t0,
        x0: x0.to_vec(),
        r,
        lhs,
        energy_2r,
        gradient_part,
        penalty_part,
        oscillation: osc,
        harmonic,
        constants,
        pre_asymptotic: penalty_part > gradient_part,
    })
}
