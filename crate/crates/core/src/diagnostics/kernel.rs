use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, SphereField};
use crate::flow::FlowConfig;
use crate::grid::{build_grid, DomainSpec};
use crate::quadrature::{integrate, region_nodes, weighted_sum, Region};

use super::energy::energy_density;

/// Backward heat kernel `G(t, x) = (4 pi (t0 - t))^(-d/2) exp(-|x - x0|^2 / (4 (t0 - t)))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardKernel {
    pub t0: f64,
    pub x0: Vec<f64>,
}

impl BackwardKernel {
    pub fn new(t0: f64, x0: &[f64]) -> Self {
        Self {
            t0,
            x0: x0.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t < self.t0) {
            return Err(Error::KernelDomain { t, t0: self.t0 });
        }
        Ok(self.eval_unchecked(self.t0 - t, x))
    }

    /// Kernel at lag `s = t0 - t > 0`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, s: f64, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum();
        (4.0 * PI * s).powf(-0.5 * self.dim() as f64) * (-r2 / (4.0 * s)).exp()
    }

    /// `∫ G(t, x) dx` over the box of half-width `factor * sqrt(t0 - t)`
    /// around `x0`, sampled with `n` nodes per axis.
    pub fn mass(&self, t: f64, factor: f64, n: usize) -> Result<f64> {
        if !(t < self.t0) {
            return Err(Error::KernelDomain { t, t0: self.t0 });
        }
        let s = self.t0 - t;
        let grid = Arc::new(build_grid(DomainSpec::cube(self.dim(), factor * s.sqrt(), n))?);
        let shifted: Vec<f64> = vec![0.0; self.dim()];
        let centred = BackwardKernel::new(self.t0, &shifted);
        let g = ScalarField::from_fn(grid, t, |x| centred.eval_unchecked(s, x));
        integrate(&g, &Region::Domain)
    }
}

/// `∫_Ω e G dx` at the slice time `u.t`.
pub fn kernel_weighted_energy(u: &SphereField, kernel: &BackwardKernel, cfg: &FlowConfig) -> Result<f64> {
    if !(u.t < kernel.t0) {
        return Err(Error::KernelDomain { t: u.t, t0: kernel.t0 });
    }
    if kernel.dim() != u.grid().dim() {
        return Err(Error::Precondition("kernel and field dimensions differ".into()));
    }
    let e = energy_density(u, cfg)?;
    let grid = u.grid();
    let s = kernel.t0 - u.t;
    let nodes = region_nodes(grid, &Region::Domain);
    Ok(weighted_sum(grid, &nodes, |i| {
        e.get(i) * kernel.eval_unchecked(s, &grid.coords(i))
    }))
}

/// `(t0 - t) ∫_Ω e G dx`, invariant under parabolic rescaling about the anchor.
pub fn scaled_kernel_energy(u: &SphereField, kernel: &BackwardKernel, cfg: &FlowConfig) -> Result<f64> {
    Ok((kernel.t0 - u.t) * kernel_weighted_energy(u, kernel, cfg)?)
}
