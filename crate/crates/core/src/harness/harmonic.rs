use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::grid::{DomainGrid, NodeClass};
use crate::quadrature::pairwise_sum;

/// Componentwise discrete harmonic extension of boundary data.
#[derive(Debug, Clone)]
pub struct HarmonicExtension {
    pub field: SphereField,
    /// Max-norm of the discrete Laplacian at interior nodes after the solve.
    pub residual: f64,
    pub iterations: usize,
    /// Per component: interior values lie within the boundary range.
    pub max_principle: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: 1_000_000,
        }
    }
}

/// Solves `lap h = 0` at interior nodes with `h = u0` on boundary nodes by
/// conjugate gradients, one component at a time.
pub fn harmonic_extension(u0: &SphereField, opts: &HarmonicOptions) -> Result<HarmonicExtension> {
    u0.check_finite()?;
    let grid = u0.grid();
    let k = u0.ncomp();
    let n = grid.node_count();
    let mut out = u0.clone();
    let mut iterations = 0;
    let mut max_principle = Vec::with_capacity(k);
    for c in 0..k {
        let data: Vec<f64> = (0..n).map(|i| u0.at(i)[c]).collect();
        let (lo, hi) = grid
            .boundary_nodes()
            .iter()
            .map(|&i| data[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (sol, its) = solve_component(grid, &data, opts)?;
        iterations = iterations.max(its);
        let mut ok = true;
        for &i in grid.interior_nodes() {
            out.at_mut(i)[c] = sol[i];
            ok &= sol[i] >= lo && sol[i] <= hi;
        }
        max_principle.push(ok);
    }
    let residual = laplacian_max(&out);
    Ok(HarmonicExtension {
        field: out,
        residual,
        iterations,
        max_principle,
    })
}

fn laplacian_max(f: &SphereField) -> f64 {
    let lap = crate::stencil::laplacian(f);
    f.grid()
        .interior_nodes()
        .iter()
        .flat_map(|&i| lap.at(i).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

/// `(A x)_i = sum_a (2 x_i - x_{i+} - x_{i-}) / h_a^2` over interior unknowns.
fn apply(grid: &DomainGrid, x: &[f64], out: &mut [f64]) {
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        if grid.class(i) != NodeClass::Interior {
            *o = 0.0;
            return;
        }
        let mut acc = 0.0;
        for a in 0..grid.dim() {
            let inv = 1.0 / (grid.spacing(a) * grid.spacing(a));
            acc += 2.0 * x[i] * inv;
            for fw in [true, false] {
                let j = grid.neighbor(i, a, fw).expect("interior node");
                if grid.class(j) == NodeClass::Interior {
                    acc -= x[j] * inv;
                }
            }
        }
        *o = acc;
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let t: Vec<f64> = a.par_iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&t)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn solve_component(grid: &DomainGrid, data: &[f64], opts: &HarmonicOptions) -> Result<(Vec<f64>, usize)> {
    let n = grid.node_count();
    // right-hand side: boundary neighbours moved over
    let mut b = vec![0.0; n];
    for &i in grid.interior_nodes() {
        for a in 0..grid.dim() {
            let inv = 1.0 / (grid.spacing(a) * grid.spacing(a));
            for fw in [true, false] {
                let j = grid.neighbor(i, a, fw).expect("interior node");
                if grid.class(j) != NodeClass::Interior {
                    b[i] += data[j] * inv;
                }
            }
        }
    }
    // start from the boundary mean so constant data is solved exactly
    let bn = grid.boundary_nodes();
    let (lo, hi) = bn
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(data[i]), b.max(data[i])));
    let mean = if bn.is_empty() {
        0.0
    } else if lo == hi {
        lo
    } else {
        pairwise_sum(&bn.iter().map(|&i| data[i]).collect::<Vec<_>>()) / bn.len() as f64
    };
    let mut x = vec![0.0; n];
    for &i in grid.interior_nodes() {
        x[i] = mean;
    }
    let mut ax = vec![0.0; n];
    apply(grid, &x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = Vec::new();
    let mut it = 0;
    loop {
        let res = max_abs(&r);
        if res < opts.tol {
            // confirm with the true residual
            apply(grid, &x, &mut ax);
            let true_res = b.iter().zip(&ax).map(|(b, a)| (b - a).abs()).fold(0.0, f64::max);
            if true_res < opts.tol {
                return Ok((x, it));
            }
            r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            p = r.clone();
            rr = dot(&r, &r);
        }
        if it >= opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations: it,
                last_residual: res,
                history,
            });
        }
        history.push(res);
        apply(grid, &p, &mut ax);
        let pap = dot(&p, &ax);
        if pap <= 0.0 {
            return Ok((x, it));
        }
        let alpha = rr / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ax).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.par_iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        it += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use std::sync::Arc;

    #[test]
    fn constant_boundary_gives_constant() {
        let g = Arc::new(build_grid(DomainSpec::unit_ball(3, 9)).unwrap());
        let u = SphereField::constant(g.clone(), &[0.0, 0.6, 0.8], 0.0);
        let h = harmonic_extension(&u, &HarmonicOptions::default()).unwrap();
        for &i in g.interior_nodes() {
            assert_eq!(h.field.at(i), &[0.0, 0.6, 0.8]);
        }
        assert!(h.max_principle.iter().all(|b| *b));
    }

    #[test]
    fn coordinates_are_reproduced() {
        let g = Arc::new(build_grid(DomainSpec::unit_ball(3, 17)).unwrap());
        let u = SphereField::from_fn(g.clone(), 3, 0.0, |x, o| o.copy_from_slice(x));
        let h = harmonic_extension(&u, &HarmonicOptions::default()).unwrap();
        assert!(h.residual < 1e-10);
        for &i in g.interior_nodes() {
            for c in 0..3 {
                assert!((h.field.at(i)[c] - g.coord(i, c)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn iteration_cap_reports_history() {
        let g = Arc::new(build_grid(DomainSpec::unit_ball(3, 17)).unwrap());
        let u = SphereField::from_fn(g.clone(), 3, 0.0, |x, o| o.copy_from_slice(x));
        let opts = HarmonicOptions {
            tol: 1e-11,
            max_iterations: 3,
        };
        match harmonic_extension(&u, &opts) {
            Err(Error::NoConvergence { history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
