//! Node-weight quadrature in space and trapezoidal quadrature in time.
//!
//! Reductions go through [`pairwise_sum`] over node-ordered contributions, so
//! results do not depend on how many threads produced the contributions.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::DomainGrid;

/// Pairwise (tree) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// The whole discrete domain.
    Domain,
    /// Open ball `|x - center| < radius`, intersected with the domain.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball {
            center: center.to_vec(),
            radius,
        }
    }
}

/// Nodes with positive quadrature weight inside `region`, in node order.
pub fn region_nodes(grid: &DomainGrid, region: &Region) -> Vec<usize> {
    match region {
        Region::Domain => (0..grid.node_count()).filter(|&i| grid.weight(i) > 0.0).collect(),
        Region::Ball { center, radius } => ball_nodes(grid, center, *radius)
            .into_iter()
            .filter(|&i| grid.weight(i) > 0.0)
            .collect(),
    }
}

/// All lattice nodes with `|x - center| < radius`, in node order, by scanning
/// the index bounding box of the ball.
pub fn ball_nodes(grid: &DomainGrid, center: &[f64], radius: f64) -> Vec<usize> {
    let d = grid.dim();
    let n = grid.n();
    let mut lo = vec![0usize; d];
    let mut hi = vec![0usize; d];
    for a in 0..d {
        let h = grid.spacing(a);
        let origin = grid.coord(0, a);
        let l = ((center[a] - radius - origin) / h).floor().max(0.0);
        let u = ((center[a] + radius - origin) / h).ceil().min((n - 1) as f64);
        if u < l {
            return Vec::new();
        }
        lo[a] = l as usize;
        hi[a] = u as usize;
    }
    let r2 = radius * radius;
    let mut out = Vec::new();
    let mut idx = lo.clone();
    loop {
        let node = idx.iter().fold(0usize, |acc, &k| acc * n + k);
        if grid.dist_sq(node, center) < r2 {
            out.push(node);
        }
        // odometer increment, last axis fastest
        let mut a = d;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if idx[a] < hi[a] {
                idx[a] += 1;
                for b in a + 1..d {
                    idx[b] = lo[b];
                }
                break;
            }
        }
    }
}

/// `∫_region g dx` with the grid's node weights.
pub fn integrate(g: &ScalarField, region: &Region) -> Result<f64> {
    let grid = g.grid();
    let nodes = region_nodes(grid, region);
    if nodes.is_empty() {
        return Err(Error::EmptyRegion(format!("{region:?} contains no weighted node")));
    }
    let terms: Vec<f64> = nodes.iter().map(|&i| g.get(i) * grid.weight(i)).collect();
    Ok(pairwise_sum(&terms))
}

/// Sum of `f(node) * weight(node)` over an explicit node list.
pub fn weighted_sum(grid: &DomainGrid, nodes: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    let terms: Vec<f64> = nodes.iter().map(|&i| f(i) * grid.weight(i)).collect();
    pairwise_sum(&terms)
}

/// Trapezoidal weights for `∫_a^b f(t) dt` where `f` is the piecewise-linear
/// interpolant through `(times[k], f_k)`. The window is clipped to
/// `[times[0], times[last]]`. Returns `None` if the clipped window is empty
/// or there are fewer than two sample times.
pub fn time_weights(times: &[f64], a: f64, b: f64) -> Option<Vec<f64>> {
    if times.len() < 2 {
        return None;
    }
    let lo = a.max(times[0]);
    let hi = b.min(times[times.len() - 1]);
    if hi <= lo {
        return None;
    }
    let mut w = vec![0.0; times.len()];
    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        let alpha = lo.max(t0);
        let beta = hi.min(t1);
        if beta <= alpha {
            continue;
        }
        let len = t1 - t0;
        // linear-interpolant weights of the clip endpoints
        let s_a = (alpha - t0) / len;
        let s_b = (beta - t0) / len;
        let half = 0.5 * (beta - alpha);
        w[k] += half * ((1.0 - s_a) + (1.0 - s_b));
        w[k + 1] += half * (s_a + s_b);
    }
    Some(w)
}
