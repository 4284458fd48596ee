use crate::error::{Error, Result};
use crate::field::{dot, ScalarField, SphereField};
use crate::flow::{FlowConfig, FlowTrace, Scheme};
use crate::quadrature::{pairwise_sum, weighted_sum, region_nodes, Region};
use crate::stencil::intrinsic_gradient_sq;

/// `e = |grad u|^2 / 2 + lambda^(1-kappa) (|u|^2 - 1)^2 / 4` node-wise, with
/// both parts kept.
#[derive(Debug, Clone)]
pub struct EnergyDensityField {
    pub gradient: ScalarField,
    pub penalty: ScalarField,
    pub total: ScalarField,
}

impl EnergyDensityField {
    pub fn get(&self, node: usize) -> f64 {
        self.total.get(node)
    }
}

/// Energy density of `u` for the scheme in `cfg`. The penalty part is zero
/// for the projected flow. Gradients use the intrinsic stencil.
pub fn energy_density(u: &SphereField, cfg: &FlowConfig) -> Result<EnergyDensityField> {
    if cfg.scheme == Scheme::Glhf && !(cfg.lambda >= 1.0) {
        return Err(Error::Config(format!("lambda = {} must be >= 1", cfg.lambda)));
    }
    let mu = cfg.penalty_coefficient();
    let grid = u.grid_arc().clone();
    let g = intrinsic_gradient_sq(u);
    let half: Vec<f64> = g.values().iter().map(|v| 0.5 * v).collect();
    let pen: Vec<f64> = (0..grid.node_count())
        .map(|i| {
            if !grid.is_active(i) || mu == 0.0 {
                return 0.0;
            }
            let s = dot(u.at(i), u.at(i)) - 1.0;
            0.25 * mu * s * s
        })
        .collect();
    let total: Vec<f64> = half.iter().zip(&pen).map(|(a, b)| a + b).collect();
    Ok(EnergyDensityField {
        gradient: ScalarField::new(grid.clone(), half, u.t)?,
        penalty: ScalarField::new(grid.clone(), pen, u.t)?,
        total: ScalarField::new(grid, total, u.t)?,
    })
}

/// `∫_{Q(T)} lambda^(1-kappa) (|u|^2 - 1)^2 dz` over the whole trace.
pub fn penalty_integral(trace: &FlowTrace, lambda: f64, kappa: f64) -> Result<f64> {
    if trace.config.scheme != Scheme::Glhf {
        return Err(Error::Precondition("penalty integral needs a GLHF trace".into()));
    }
    let mu = lambda.powf(1.0 - kappa);
    let grid = trace.grid();
    let nodes = region_nodes(grid, &Region::Domain);
    let weights = trace
        .time_weights(trace.t_first(), trace.t_last())
        .unwrap_or_else(|| vec![0.0; trace.checkpoints.len()]);
    let slices: Vec<f64> = trace
        .checkpoints
        .iter()
        .zip(&weights)
        .map(|(u, w)| {
            if *w == 0.0 {
                return 0.0;
            }
            w * weighted_sum(grid, &nodes, |i| {
                let s = dot(u.at(i), u.at(i)) - 1.0;
                mu * s * s
            })
        })
        .collect();
    Ok(pairwise_sum(&slices))
}

/// Least-squares exponent `p` in `penalty ~ (1 / log lambda)^p`.
pub fn penalty_decay_exponent(samples: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(l, p)| *l > 1.0 && *p > 0.0)
        .map(|(l, p)| ((1.0 / l.ln()).ln(), p.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Precondition("need two positive penalties with lambda > 1".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
