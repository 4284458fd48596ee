use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::flow::FlowTrace;
use crate::grid::DomainGrid;
use crate::quadrature::{pairwise_sum, region_nodes, Region};

use super::energy::energy_density;
use super::kernel::BackwardKernel;
use super::report::ReportRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnchorKind {
    /// Ladder admissible for the interior form: `R_k <= sqrt(t0) / 2`,
    /// closing term `C exp(R2^mu - R1^mu) Θ(R2) + C(mu) (R2 - R1)`.
    Interior,
    /// Boundary form: `R_k < sqrt(t0 / 4)`, closing term
    /// `C Θ(R2) + C(eps) (R2^eps - R1^eps)`.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityOptions {
    /// `eps0` for boundary anchors, `mu0` for interior anchors.
    pub exponent: f64,
    /// Geometric sub-steps per ladder interval for the `dR` integral.
    pub refine: usize,
    /// Flag non-monotone behaviour when `(L - Θ(R2)) / Θ(R2)` exceeds this.
    pub flag_tol: f64,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self {
            exponent: 0.25,
            refine: 16,
            flag_tol: 0.1,
        }
    }
}

/// Both sides of the localized monotonicity inequality on a radius ladder.
///
/// `Θ(R) = ∫_{t0-4R^2}^{t0-R^2} ∫_Ω e G dx dt`; the defect between `R1` and
/// `R2` is `∫_{R1}^{R2} (2/R) ∫_{slab(R)} (t0 - t) ∫_Ω |S|^2 G dx dt dR` with
/// `S = u_t - (x - x0)·grad u / (2 (t0 - t))`. For the heat flow on `R^d`,
/// `Θ(R1) + defect = Θ(R2)` exactly.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub kind: AnchorKind,
    pub slab: &'static str,
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
    /// `defect(R_1, R_j)`.
    pub defect: Vec<f64>,
    /// Smallest multiplicative constant closing every pair `R_i < R_j`.
    pub fitted_c: f64,
    /// Smallest additive constant with the multiplicative one fixed at 1.
    pub additive_c: f64,
    /// `max_{i<j} (Θ(R_i) + defect(R_i, R_j) - Θ(R_j)) / Θ(R_j)`.
    pub imbalance: f64,
    pub non_monotone: bool,
    pub options: MonotonicityOptions,
}

impl MonotonicityReport {
    pub fn records(&self) -> Vec<ReportRecord> {
        let mut z0 = vec![self.t0];
        z0.extend(&self.x0);
        self.radii
            .iter()
            .enumerate()
            .map(|(j, &r)| ReportRecord {
                kind: "monotonicity".into(),
                z0: z0.clone(),
                r,
                lhs: self.theta[0] + self.defect[j],
                rhs: self.theta[j],
                defect: Some(self.defect[j]),
                fitted_c: self.fitted_c,
            })
            .collect()
    }
}

pub fn monotonicity_check(
    trace: &FlowTrace,
    t0: f64,
    x0: &[f64],
    radii: &[f64],
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    let grid = trace.grid();
    if x0.len() != grid.dim() {
        return Err(Error::Precondition("anchor dimension mismatch".into()));
    }
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InadmissibleRadii("radii must be positive and non-empty".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InadmissibleRadii("radii must be strictly increasing".into()));
    }
    if opts.refine == 0 || !(opts.exponent > 0.0) {
        return Err(Error::Precondition("refine >= 1 and exponent > 0 required".into()));
    }
    let r_max = *radii.last().unwrap();
    let r_min = radii[0];
    let elapsed = t0 - trace.t_first();
    let kind = if grid.distance_to_boundary(x0) >= 2.0 * r_max {
        AnchorKind::Interior
    } else {
        AnchorKind::Boundary
    };
    match kind {
        AnchorKind::Interior if !(elapsed > 0.0 && r_max <= elapsed.sqrt() / 2.0) => {
            return Err(Error::InadmissibleRadii(format!(
                "interior anchor needs R_k <= sqrt(t0)/2 = {}, got R_k = {r_max}",
                elapsed.max(0.0).sqrt() / 2.0
            )))
        }
        AnchorKind::Boundary if !(elapsed > 0.0 && r_max < (elapsed / 4.0).sqrt()) => {
            return Err(Error::InadmissibleRadii(format!(
                "boundary anchor needs R_k < sqrt(t0/4) = {}, got R_k = {r_max}",
                (elapsed.max(0.0) / 4.0).sqrt()
            )))
        }
        _ => {}
    }
    if t0 - r_min * r_min > trace.t_last() + 1e-12 {
        return Err(Error::Precondition(format!(
            "slab of R_1 = {r_min} ends at {} after the trace end {}",
            t0 - r_min * r_min,
            trace.t_last()
        )));
    }

    let kernel = BackwardKernel::new(t0, x0);
    let lo = t0 - 4.0 * r_max * r_max;
    let hi = t0 - r_min * r_min;
    let nodes = region_nodes(grid, &Region::Domain);
    let times = trace.times();
    let n_ck = times.len();
    // A_k = ∫ e G dx, B_k = ∫ |S|^2 G dx at checkpoints the slabs can touch
    let mut a = vec![0.0; n_ck];
    let mut b = vec![0.0; n_ck];
    let touched = trace.time_weights(lo, hi).unwrap_or_default();
    for (k, w) in touched.iter().enumerate() {
        if *w > 0.0 && times[k] < t0 {
            let (ak, bk) = slice_terms(trace, k, &kernel, &nodes)?;
            a[k] = ak;
            b[k] = bk;
        }
    }

    let theta_at = |r: f64| -> f64 {
        match trace.time_weights(t0 - 4.0 * r * r, t0 - r * r) {
            Some(w) => pairwise_sum(&w.iter().zip(&a).map(|(w, a)| w * a).collect::<Vec<_>>()),
            None => 0.0,
        }
    };
    let flux_at = |r: f64| -> f64 {
        match trace.time_weights(t0 - 4.0 * r * r, t0 - r * r) {
            Some(w) => pairwise_sum(
                &w.iter()
                    .enumerate()
                    .map(|(k, w)| w * (t0 - times[k]) * b[k])
                    .collect::<Vec<_>>(),
            ),
            None => 0.0,
        }
    };

    let theta: Vec<f64> = radii.iter().map(|&r| theta_at(r)).collect();
    // cumulative defect from R_1 by the trapezoid rule in log R
    let mut cumulative = vec![0.0; radii.len()];
    for j in 1..radii.len() {
        let (r0, r1) = (radii[j - 1], radii[j]);
        let step = (r1 / r0).ln() / opts.refine as f64;
        let mut acc = 0.0;
        let mut prev = 2.0 * flux_at(r0);
        for m in 1..=opts.refine {
            let r = r0 * (step * m as f64).exp();
            let cur = 2.0 * flux_at(r);
            acc += 0.5 * (prev + cur) * step;
            prev = cur;
        }
        cumulative[j] = cumulative[j - 1] + acc;
    }

    let mu = opts.exponent;
    let mut fitted_c = 0.0f64;
    let mut additive_c = 0.0f64;
    let mut imbalance = f64::NEG_INFINITY;
    for j in 1..radii.len() {
        for i in 0..j {
            let lhs = theta[i] + cumulative[j] - cumulative[i];
            let (growth, gap) = match kind {
                AnchorKind::Interior => (
                    (radii[j].powf(mu) - radii[i].powf(mu)).exp(),
                    radii[j] - radii[i],
                ),
                AnchorKind::Boundary => (1.0, radii[j].powf(mu) - radii[i].powf(mu)),
            };
            let rhs = growth * theta[j];
            if lhs > 0.0 {
                fitted_c = fitted_c.max(if rhs > 0.0 { lhs / rhs } else { f64::INFINITY });
            }
            additive_c = additive_c.max((lhs - rhs).max(0.0) / gap);
            if theta[j] > 0.0 {
                imbalance = imbalance.max((lhs - theta[j]) / theta[j]);
            } else if lhs > 0.0 {
                imbalance = f64::INFINITY;
            }
        }
    }
    if imbalance == f64::NEG_INFINITY {
        imbalance = 0.0;
    }
    Ok(MonotonicityReport {
        t0,
        x0: x0.to_vec(),
        kind,
        slab: "(t0-4R^2, t0-R^2)",
        radii: radii.to_vec(),
        theta,
        defect: cumulative,
        fitted_c,
        additive_c,
        imbalance,
        non_monotone: imbalance > opts.flag_tol,
        options: opts.clone(),
    })
}

fn slice_terms(
    trace: &FlowTrace,
    k: usize,
    kernel: &BackwardKernel,
    nodes: &[usize],
) -> Result<(f64, f64)> {
    let u = &trace.checkpoints[k];
    let grid = u.grid();
    let s = kernel.t0 - u.t;
    let e = energy_density(u, &trace.config)?;
    let n = trace.checkpoints.len();
    let (prev, next) = match (k > 0, k + 1 < n) {
        (true, true) => (&trace.checkpoints[k - 1], &trace.checkpoints[k + 1]),
        (false, true) => (u, &trace.checkpoints[k + 1]),
        (true, false) => (&trace.checkpoints[k - 1], u),
        (false, false) => (u, u),
    };
    let span = next.t - prev.t;
    let ncomp = u.ncomp();
    let vol = grid.cell_volume();
    let terms: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&i| {
            let x = grid.coords(i);
            let g = kernel.eval_unchecked(s, &x);
            let w = grid.weight(i) / vol;
            let mut sq = 0.0;
            let mut radial = vec![0.0; ncomp];
            for (a, xa) in x.iter().enumerate() {
                let coef = (xa - kernel.x0[a]) / (2.0 * s);
                axis_derivative_acc(grid, u, i, a, coef, &mut radial);
            }
            for c in 0..ncomp {
                let ut = if span > 0.0 {
                    (next.at(i)[c] - prev.at(i)[c]) / span
                } else {
                    0.0
                };
                let sc = ut - radial[c];
                sq += sc * sc;
            }
            (e.get(i) * g * w, sq * g * w)
        })
        .collect();
    let ea: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let eb: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok((pairwise_sum(&ea) * vol, pairwise_sum(&eb) * vol))
}

/// Adds `coef * d_a u(node)` (centred, one-sided where a neighbour is missing).
fn axis_derivative_acc(
    grid: &DomainGrid,
    u: &SphereField,
    node: usize,
    axis: usize,
    coef: f64,
    out: &mut [f64],
) {
    let h = grid.spacing(axis);
    let p = grid.neighbor(node, axis, true).filter(|&j| grid.is_active(j));
    let m = grid.neighbor(node, axis, false).filter(|&j| grid.is_active(j));
    let (hi, lo, span) = match (p, m) {
        (Some(p), Some(m)) => (p, m, 2.0 * h),
        (Some(p), None) => (p, node, h),
        (None, Some(m)) => (node, m, h),
        (None, None) => return,
    };
    for (c, o) in out.iter_mut().enumerate() {
        *o += coef * (u.at(hi)[c] - u.at(lo)[c]) / span;
    }
}
