use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dist_sq, ScalarField, SphereField};
use crate::flow::FlowTrace;
use crate::grid::NodeClass;
use crate::quadrature::{ball_nodes, pairwise_sum, region_nodes, Region};
use crate::stencil::intrinsic_gradient_sq;

use super::energy::energy_density;
use super::{cylinder, slab_weights};

fn gradient_fields(trace: &FlowTrace) -> Vec<ScalarField> {
    trace.checkpoints.iter().map(intrinsic_gradient_sq).collect()
}

fn cylinder_sum(
    fields: &[ScalarField],
    nodes: &[usize],
    times: &[(usize, f64)],
) -> f64 {
    let grid = fields[0].grid();
    let slices: Vec<f64> = times
        .iter()
        .map(|&(k, w)| {
            let terms: Vec<f64> = nodes.iter().map(|&i| fields[k].get(i) * grid.weight(i)).collect();
            w * pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&slices)
}

/// `(1 / (2 R^d)) ∫_{P_R(z0) ∩ Q} |grad u|^2 dz` with `P_R(z0) = (t0 - R^2, t0 + R^2) x B_R(x0)`.
pub fn scaled_energy_density(trace: &FlowTrace, t0: f64, x0: &[f64], r: f64) -> Result<f64> {
    let (nodes, times) = cylinder(trace, t0, x0, r)?;
    let fields: Vec<ScalarField> = trace
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, u)| {
            if times.iter().any(|&(j, _)| j == k) {
                intrinsic_gradient_sq(u)
            } else {
                ScalarField::new(u.grid_arc().clone(), vec![0.0; u.grid().node_count()], u.t)
                    .expect("sized")
            }
        })
        .collect();
    let d = trace.grid().dim() as i32;
    Ok(cylinder_sum(&fields, &nodes, &times) / (2.0 * r.powi(d)))
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularCandidateSet {
    pub eps0: f64,
    pub radii: Vec<f64>,
    /// Flagged `(checkpoint index, node)` pairs in lexicographic order.
    pub points: Vec<(usize, usize)>,
    pub times: Vec<f64>,
    pub space_time_points: usize,
    pub flagged_fraction: f64,
}

impl SingularCandidateSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, checkpoint: usize, node: usize) -> bool {
        self.points.binary_search(&(checkpoint, node)).is_ok()
    }

    /// Distinct flagged nodes.
    pub fn nodes(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Space-time points `(t_k, x_i)` over checkpoints and weighted nodes whose
/// scaled density is `>= eps0` at every probed radius. Radii are processed in
/// increasing order and each one only re-examines the survivors of the last.
pub fn singular_set(trace: &FlowTrace, eps0: f64, radii: &[f64]) -> Result<SingularCandidateSet> {
    if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Precondition("singular set needs positive radii".into()));
    }
    let grid = trace.grid();
    let d = grid.dim() as i32;
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let fields = gradient_fields(trace);
    let space = region_nodes(grid, &Region::Domain);
    let n_ck = trace.checkpoints.len();
    let mut candidates: Vec<(usize, usize)> = (0..n_ck)
        .flat_map(|k| space.iter().map(move |&i| (k, i)))
        .collect();
    let times = trace.times();

    for &r in &sorted {
        if candidates.is_empty() {
            break;
        }
        // ball sums per (checkpoint, node) for the distinct candidate nodes
        let uniq: Vec<usize> = candidates.iter().map(|c| c.1).collect::<BTreeSet<_>>().into_iter().collect();
        let balls: Vec<Vec<f64>> = uniq
            .par_iter()
            .map(|&i| {
                let x = grid.coords(i);
                let ball: Vec<usize> = ball_nodes(grid, &x, r)
                    .into_iter()
                    .filter(|&j| grid.weight(j) > 0.0)
                    .collect();
                fields
                    .iter()
                    .map(|f| {
                        let t: Vec<f64> = ball.iter().map(|&j| f.get(j) * grid.weight(j)).collect();
                        pairwise_sum(&t)
                    })
                    .collect()
            })
            .collect();
        let weights: Vec<Option<Vec<(usize, f64)>>> = (0..n_ck)
            .map(|k| slab_weights(trace, times[k] - r * r, times[k] + r * r))
            .collect();
        let norm = 2.0 * r.powi(d);
        candidates.retain(|&(k, i)| {
            let slot = uniq.binary_search(&i).expect("candidate node listed");
            let Some(w) = &weights[k] else { return false };
            let slices: Vec<f64> = w.iter().map(|&(m, w)| w * balls[slot][m]).collect();
            pairwise_sum(&slices) / norm >= eps0
        });
    }
    let total = n_ck * space.len();
    Ok(SingularCandidateSet {
        eps0,
        radii: sorted,
        flagged_fraction: candidates.len() as f64 / total.max(1) as f64,
        points: candidates,
        times,
        space_time_points: total,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    /// `sup |u(t,x) - u(s,x)| / |t - s|^(1/2)` over sampled pairs.
    pub modulus: f64,
    /// `modulus * R0`, the constant in `C / R0 |t - s|^(1/2)`.
    pub implied_c: f64,
    pub pairs: usize,
    pub warning: Option<String>,
}

/// Time Hölder-1/2 modulus over the nodes of `region`, sampling checkpoint
/// pairs at separations 1, 2, 4, ... .
pub fn holder_time_modulus(
    trace: &FlowTrace,
    region: &Region,
    r0: f64,
    singular: Option<&SingularCandidateSet>,
) -> Result<HolderReport> {
    let n = trace.checkpoints.len();
    if n < 2 {
        return Err(Error::Precondition("Hölder modulus needs >= 2 checkpoints".into()));
    }
    let grid = trace.grid();
    let nodes: Vec<usize> = match region {
        Region::Domain => (0..grid.node_count()).filter(|&i| grid.is_active(i)).collect(),
        Region::Ball { center, radius } => ball_nodes(grid, center, *radius)
            .into_iter()
            .filter(|&i| grid.is_active(i))
            .collect(),
    };
    if nodes.is_empty() {
        return Err(Error::EmptyRegion(format!("{region:?} has no active node")));
    }
    let mut pairs = Vec::new();
    let mut gap = 1;
    while gap < n {
        for k in 0..n - gap {
            pairs.push((k, k + gap));
        }
        gap *= 2;
    }
    if (0, n - 1) != *pairs.last().unwrap() {
        pairs.push((0, n - 1));
    }
    let modulus = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (ua, ub) = (&trace.checkpoints[a], &trace.checkpoints[b]);
            let dt = (ub.t - ua.t).abs().sqrt();
            nodes
                .iter()
                .map(|&i| dist_sq(ua.at(i), ub.at(i)).sqrt() / dt)
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let warning = singular.and_then(|s| {
        let hit = s.nodes().into_iter().filter(|i| nodes.binary_search(i).is_ok()).count();
        (hit > 0).then(|| format!("region contains {hit} singular candidate node(s)"))
    });
    Ok(HolderReport {
        modulus,
        implied_c: modulus * r0,
        pairs: pairs.len(),
        warning,
    })
}

/// `g(t) = t (1 + log(1/t))^(d+1)`; increasing only for `t < e^(-d)`.
pub fn g_radius(t: f64, d: usize) -> f64 {
    t * (1.0 + (1.0 / t).ln()).powi(d as i32 + 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityAnchor {
    pub t0: f64,
    pub x0: Vec<f64>,
    /// `R0^(-d) ∫_{P_g(R0)(z0) ∩ Q} e dz`.
    pub density: f64,
    pub small: bool,
    /// `sup e` over `P_R0(z0) ∩ Q`.
    pub sup_e: f64,
    pub implied_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRegularityReport {
    pub eps0: f64,
    pub r0: f64,
    pub g_of_r0: f64,
    pub g_rule: &'static str,
    pub boundary_c2: f64,
    pub anchors: Vec<RegularityAnchor>,
    /// Largest implied constant over small-density anchors.
    pub fitted_c: f64,
    pub envelope_holds: bool,
}

/// For each anchor with small `g(R0)`-cylinder density, records `sup e` over
/// `P_R0` and the constant `C = sup e / (1/R0^2 + |u0|_{C^2(∂Ω)})`.
pub fn epsilon_regularity_report(
    trace: &FlowTrace,
    eps0: f64,
    r0: f64,
    anchors: &[(f64, Vec<f64>)],
) -> Result<EpsilonRegularityReport> {
    if !(eps0 > 0.0) {
        return Err(Error::Precondition("eps0 must be positive".into()));
    }
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::Precondition("R0 must lie in (0, 1)".into()));
    }
    let grid = trace.grid();
    let d = grid.dim();
    let g_r0 = g_radius(r0, d);
    let energies: Vec<ScalarField> = trace
        .checkpoints
        .iter()
        .map(|u| energy_density(u, &trace.config).map(|e| e.total))
        .collect::<Result<_>>()?;
    let c2 = boundary_c2_norm(trace.initial());
    let scale = 1.0 / (r0 * r0) + c2;
    let mut out = Vec::with_capacity(anchors.len());
    for (t0, x0) in anchors {
        let (nodes, times) = cylinder(trace, *t0, x0, g_r0)?;
        let density = cylinder_sum(&energies, &nodes, &times) / r0.powi(d as i32);
        let (inner, inner_t) = cylinder(trace, *t0, x0, r0)?;
        let sup_e = inner_t
            .iter()
            .flat_map(|&(k, _)| inner.iter().map(move |&i| (k, i)))
            .map(|(k, i)| energies[k].get(i))
            .fold(0.0, f64::max);
        out.push(RegularityAnchor {
            t0: *t0,
            x0: x0.clone(),
            density,
            small: density < eps0,
            sup_e,
            implied_c: sup_e / scale,
        });
    }
    let fitted_c = out
        .iter()
        .filter(|a| a.small)
        .map(|a| a.implied_c)
        .fold(0.0, f64::max);
    let envelope_holds = out
        .iter()
        .filter(|a| a.small)
        .all(|a| a.sup_e <= fitted_c * scale * (1.0 + 1e-12));
    Ok(EpsilonRegularityReport {
        eps0,
        r0,
        g_of_r0: g_r0,
        g_rule: "g(t) = t (1 + log(1/t))^(d+1)",
        boundary_c2: c2,
        anchors: out,
        fitted_c,
        envelope_holds,
    })
}

/// Discrete `C^2` norm of the boundary data: max over boundary nodes of
/// `|u| + |grad u| + max_a |d_aa u|`, using the active neighbours available.
fn boundary_c2_norm(u: &SphereField) -> f64 {
    let grid = u.grid();
    let grad = crate::stencil::gradient_norm_sq(u);
    grid.boundary_nodes()
        .iter()
        .map(|&i| {
            let mut second = 0.0f64;
            for a in 0..grid.dim() {
                let p = grid.neighbor(i, a, true).filter(|&j| grid.is_active(j));
                let m = grid.neighbor(i, a, false).filter(|&j| grid.is_active(j));
                if let (Some(p), Some(m)) = (p, m) {
                    let h2 = grid.spacing(a) * grid.spacing(a);
                    let v: f64 = (0..u.ncomp())
                        .map(|c| {
                            let s = (u.at(p)[c] - 2.0 * u.at(i)[c] + u.at(m)[c]) / h2;
                            s * s
                        })
                        .sum();
                    second = second.max(v.sqrt());
                }
            }
            debug_assert_eq!(grid.class(i), NodeClass::Boundary);
            u.norm_at(i) + grad.get(i).sqrt() + second
        })
        .fold(0.0, f64::max)
}
