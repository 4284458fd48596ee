//! Finite-difference operators on [`SphereField`]s.
//!
//! All operators act component-wise. Interior nodes always have both axis
//! neighbours available (interior or boundary); boundary nodes only get
//! values from the gradient operators, using whichever neighbours exist.

use rayon::prelude::*;

use crate::field::{norm, ScalarField, SphereField};
use crate::grid::{DomainGrid, NodeClass};

/// `(2d+1)`-point Laplacian at interior nodes; zero elsewhere.
pub fn laplacian(f: &SphereField) -> SphereField {
    let grid = f.grid();
    let k = f.ncomp();
    let mut out = SphereField::zeros(f.grid_arc().clone(), k, f.t);
    out.values_mut()
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(node, dst)| {
            if grid.class(node) == NodeClass::Interior {
                laplacian_at(f, node, dst);
            }
        });
    out
}

/// Discrete Laplacian of `f` at one interior node, written into `out`.
#[inline]
pub fn laplacian_at(f: &SphereField, node: usize, out: &mut [f64]) {
    let grid = f.grid();
    let center = f.at(node);
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..grid.dim() {
        let inv_h2 = 1.0 / (grid.spacing(a) * grid.spacing(a));
        let p = f.at(grid.neighbor(node, a, true).expect("interior node"));
        let m = f.at(grid.neighbor(node, a, false).expect("interior node"));
        for c in 0..out.len() {
            out[c] += (p[c] - 2.0 * center[c] + m[c]) * inv_h2;
        }
    }
}

/// Neighbour form of `|grad u|^2` at an interior node:
/// `sum_j |u_j - u_i|^2 / (2 h^2)` over the `2d` axis neighbours. For unit
/// vectors this equals `-<u, lap u>`, so `lap u + |grad u|^2 u` is exactly
/// the tangential part of the discrete Laplacian.
#[inline]
pub fn neighbor_gradient_sq_at(f: &SphereField, node: usize) -> f64 {
    let grid = f.grid();
    let center = f.at(node);
    let mut acc = 0.0;
    for a in 0..grid.dim() {
        let inv_h2 = 1.0 / (grid.spacing(a) * grid.spacing(a));
        for fw in [true, false] {
            let j = grid.neighbor(node, a, fw).expect("interior node");
            acc += crate::field::dist_sq(f.at(j), center) * inv_h2 * 0.5;
        }
    }
    acc
}

/// `|grad f|^2` summed over components: centred first differences where both
/// axis neighbours are available, one-sided where only one is.
pub fn gradient_norm_sq(f: &SphereField) -> ScalarField {
    gradient_with(f, |a, b| crate::field::dist_sq(a, b))
}

/// Gradient density measured intrinsically on the sphere.
///
/// Neighbour differences use the polar metric
/// `(|a| - |b|)^2 + |a||b| theta^2`, with `theta` the angle between `a` and
/// `b`. On unit vectors this is the squared geodesic distance, so the
/// stencil is exact on great-circle maps with linear phase and it resolves
/// the energy of point singularities far better than chord differences.
pub fn intrinsic_gradient_sq(f: &SphereField) -> ScalarField {
    let grid = f.grid();
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            if !grid.is_active(node) {
                return 0.0;
            }
            let center = f.at(node);
            let mut acc = 0.0;
            for a in 0..grid.dim() {
                let inv_h2 = 1.0 / (grid.spacing(a) * grid.spacing(a));
                let mut sum = 0.0;
                let mut count = 0usize;
                for fw in [true, false] {
                    if let Some(j) = grid.neighbor(node, a, fw).filter(|&j| grid.is_active(j)) {
                        sum += polar_dist_sq(center, f.at(j));
                        count += 1;
                    }
                }
                if count > 0 {
                    acc += sum / count as f64 * inv_h2;
                }
            }
            acc
        })
        .collect();
    ScalarField::new(f.grid_arc().clone(), values, f.t).expect("sized to grid")
}

/// `(|a| - |b|)^2 + |a| |b| angle(a, b)^2`.
#[inline]
pub fn polar_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return (na - nb) * (na - nb);
    }
    // angle = 2 atan2(|a^ - b^|, |a^ + b^|), accurate at all angles
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x / na, y / nb);
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    let theta = 2.0 * diff.sqrt().atan2(sum.sqrt());
    (na - nb) * (na - nb) + na * nb * theta * theta
}

fn gradient_with(f: &SphereField, dist: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> ScalarField {
    let grid = f.grid();
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            if !grid.is_active(node) {
                return 0.0;
            }
            let mut acc = 0.0;
            for a in 0..grid.dim() {
                let h = grid.spacing(a);
                let p = neighbor_active(grid, node, a, true);
                let m = neighbor_active(grid, node, a, false);
                acc += match (p, m) {
                    (Some(p), Some(m)) => dist(f.at(p), f.at(m)) / (4.0 * h * h),
                    (Some(j), None) | (None, Some(j)) => dist(f.at(j), f.at(node)) / (h * h),
                    (None, None) => 0.0,
                };
            }
            acc
        })
        .collect();
    ScalarField::new(f.grid_arc().clone(), values, f.t).expect("sized to grid")
}

fn neighbor_active(grid: &DomainGrid, node: usize, axis: usize, fw: bool) -> Option<usize> {
    grid.neighbor(node, axis, fw).filter(|&j| grid.is_active(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn ball(n: usize) -> Arc<DomainGrid> {
        Arc::new(build_grid(DomainSpec::unit_ball(3, n)).unwrap())
    }

    #[test]
    fn constant_field_has_zero_laplacian_and_gradient() {
        let g = ball(9);
        let f = SphereField::constant(g.clone(), &[0.3, -0.2, 0.9], 0.0);
        assert!(laplacian(&f).values().iter().all(|v| *v == 0.0));
        assert!(gradient_norm_sq(&f).values().iter().all(|v| *v == 0.0));
        assert!(intrinsic_gradient_sq(&f).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quadratic_is_exact() {
        let g = ball(9);
        let f = SphereField::from_fn(g.clone(), 1, 0.0, |x, o| {
            o[0] = x.iter().map(|v| v * v).sum()
        });
        let lap = laplacian(&f);
        for &i in g.interior_nodes() {
            assert!((lap.at(i)[0] - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_gradient_is_exact() {
        let g = ball(9);
        let a = [0.7, -1.3, 0.25];
        let f = SphereField::from_fn(g.clone(), 1, 0.0, |x, o| {
            o[0] = 0.1 + a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
        });
        let gs = gradient_norm_sq(&f);
        let expect: f64 = a.iter().map(|v| v * v).sum();
        for i in 0..g.node_count() {
            if g.is_active(i) {
                assert!((gs.get(i) - expect).abs() < 1e-12, "node {i}");
            }
        }
    }

    #[test]
    fn random_field_matches_direct_summation() {
        let g = Arc::new(build_grid(DomainSpec::cube(3, 1.0, 5)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..g.node_count() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = SphereField::from_values(g.clone(), 3, vals.clone(), 0.0).unwrap();
        let lap = laplacian(&f);
        // direct (i, j, k) summation, independent of neighbor()
        let n = 5;
        let h2 = 0.25;
        let at = |i: usize, j: usize, k: usize, c: usize| vals[((i * n + j) * n + k) * 3 + c];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    for c in 0..3 {
                        let direct = (at(i + 1, j, k, c) + at(i - 1, j, k, c) + at(i, j + 1, k, c)
                            + at(i, j - 1, k, c)
                            + at(i, j, k + 1, c)
                            + at(i, j, k - 1, c)
                            - 6.0 * at(i, j, k, c))
                            / h2;
                        let node = (i * n + j) * n + k;
                        assert!((lap.at(node)[c] - direct).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn intrinsic_gradient_exact_on_linear_phase_great_circle() {
        let g = ball(17);
        let a = [0.9, -0.4, 1.1];
        let f = SphereField::from_fn(g.clone(), 3, 0.0, |x, o| {
            let phi: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            o[0] = phi.cos();
            o[1] = phi.sin();
            o[2] = 0.0;
        });
        let gs = intrinsic_gradient_sq(&f);
        let expect: f64 = a.iter().map(|v| v * v).sum();
        for &i in g.interior_nodes() {
            assert!((gs.get(i) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbor_form_is_minus_u_dot_laplacian_on_sphere() {
        let g = ball(9);
        let f = SphereField::from_fn(g.clone(), 3, 0.0, |x, o| {
            let v = [x[0] + 0.3, x[1] * x[2] + 0.1, 1.0 + x[2]];
            let r = norm(&v);
            o.iter_mut().zip(v).for_each(|(d, s)| *d = s / r);
        });
        let lap = laplacian(&f);
        for &i in g.interior_nodes() {
            let lhs = neighbor_gradient_sq_at(&f, i);
            let rhs = -crate::field::dot(f.at(i), lap.at(i));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0));
        }
    }

    #[test]
    fn polar_distance_reduces_to_geodesic_and_radial() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let q = std::f64::consts::FRAC_PI_2;
        assert!((polar_dist_sq(&a, &b) - q * q).abs() < 1e-15);
        assert!((polar_dist_sq(&[0.5, 0.0], &[0.8, 0.0]) - 0.09).abs() < 1e-15);
        assert_eq!(polar_dist_sq(&[0.0, 0.0], &[0.0, 0.5]), 0.25);
    }
}
