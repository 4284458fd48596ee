use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::grid::{DomainGrid, DomainShape};

/// Initial-data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// `x / |x|` on `B^3`; the origin node gets the north pole.
    Equator,
    /// `x / |x|` outside `B_rho`, `x (3 - |x|^2/rho^2) / (2 rho)` inside.
    SmoothedEquator { rho: f64 },
    /// Image in the polar cap `{last >= cos theta0}`.
    Cap { theta0: f64 },
    /// `(cos phi, sin phi, 0, ...)` with `phi` solving the heat equation on a box.
    GreatCircle { slope: Vec<f64>, amplitude: f64 },
    Constant { value: Vec<f64> },
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Equator => "equator",
            ScenarioKind::SmoothedEquator { .. } => "smoothed_equator",
            ScenarioKind::Cap { .. } => "cap",
            ScenarioKind::GreatCircle { .. } => "great_circle",
            ScenarioKind::Constant { .. } => "constant",
        }
    }

    pub fn generate(&self, grid: &Arc<DomainGrid>, target_dim: usize) -> Result<SphereField> {
        let need_d2 = |name: &str| {
            if target_dim != 2 {
                Err(Error::UnsupportedScenario(format!("{name} needs D = 2, got D = {target_dim}")))
            } else {
                Ok(())
            }
        };
        match self {
            ScenarioKind::Equator => {
                need_d2("equator")?;
                make_equator_map(grid)
            }
            ScenarioKind::SmoothedEquator { rho } => {
                need_d2("smoothed_equator")?;
                make_smoothed_equator(grid, *rho)
            }
            ScenarioKind::Cap { theta0 } => make_cap_map(grid, *theta0, target_dim),
            ScenarioKind::GreatCircle { slope, amplitude } => {
                make_great_circle(grid, slope, *amplitude, target_dim, 0.0)
            }
            ScenarioKind::Constant { value } => {
                if value.len() != target_dim + 1 {
                    return Err(Error::Config(format!(
                        "constant value has {} components, D + 1 = {}",
                        value.len(),
                        target_dim + 1
                    )));
                }
                Ok(SphereField::constant(grid.clone(), value, 0.0))
            }
        }
    }
}

/// `x / |x|` from `B^3` to `S^2`, with the origin node set to `(0, 0, 1)`.
pub fn make_equator_map(grid: &Arc<DomainGrid>) -> Result<SphereField> {
    if grid.dim() != 3 {
        return Err(Error::UnsupportedScenario(format!(
            "equator map needs d = 3, got d = {}",
            grid.dim()
        )));
    }
    Ok(SphereField::from_fn(grid.clone(), 3, 0.0, |x, o| {
        let r = crate::field::norm(x);
        if r == 0.0 {
            o.copy_from_slice(&[0.0, 0.0, 1.0]);
        } else {
            o.iter_mut().zip(x).for_each(|(d, s)| *d = s / r);
        }
    }))
}

/// Node carrying the arbitrary value of the equator map, if the origin is a node.
pub fn equator_origin_node(grid: &DomainGrid) -> Option<usize> {
    let zero = vec![0.0; grid.dim()];
    let node = grid.nearest_node(&zero);
    (grid.dist_sq(node, &zero) == 0.0).then_some(node)
}

/// Equator map with a polynomial core in `B_rho`. The core has `|u| < 1`:
/// the boundary trace has degree one, so no continuous unit-length
/// extension into the ball exists. The data is admissible for the penalized
/// flow (`|u| <= 1`) and is `C^1` across `|x| = rho`.
pub fn make_smoothed_equator(grid: &Arc<DomainGrid>, rho: f64) -> Result<SphereField> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::Config(format!("core radius rho = {rho} must lie in (0, 1/2)")));
    }
    if grid.dim() != 3 {
        return Err(Error::UnsupportedScenario(format!(
            "smoothed equator needs d = 3, got d = {}",
            grid.dim()
        )));
    }
    Ok(SphereField::from_fn(grid.clone(), 3, 0.0, |x, o| {
        let r = crate::field::norm(x);
        if r >= rho {
            o.iter_mut().zip(x).for_each(|(d, s)| *d = s / r);
        } else {
            let f = (3.0 - r * r / (rho * rho)) / (2.0 * rho);
            o.iter_mut().zip(x).for_each(|(d, s)| *d = s * f);
        }
    }))
}

fn half_width(grid: &DomainGrid, axis: usize) -> f64 {
    match &grid.spec().shape {
        DomainShape::UnitBall => 1.0,
        DomainShape::Box { half_widths } => half_widths[axis],
    }
}

/// Polar angle `theta = theta0 (1 + x_0/a_0) / 2`, azimuth `psi = pi x_1 / a_1`.
pub fn make_cap_map(grid: &Arc<DomainGrid>, theta0: f64, target_dim: usize) -> Result<SphereField> {
    if !(theta0 > 0.0 && theta0 < PI / 2.0) {
        return Err(Error::Config(format!("cap aperture theta0 = {theta0} must lie in (0, pi/2)")));
    }
    if target_dim < 1 {
        return Err(Error::Config("target dimension must be >= 1".into()));
    }
    let a0 = half_width(grid, 0);
    let a1 = half_width(grid, 1);
    Ok(SphereField::from_fn(grid.clone(), target_dim + 1, 0.0, |x, o| {
        let theta = theta0 * (1.0 + x[0] / a0) / 2.0;
        let psi = PI * x[1] / a1;
        o.iter_mut().for_each(|v| *v = 0.0);
        if target_dim == 1 {
            o[0] = theta.sin();
        } else {
            o[0] = theta.sin() * psi.cos();
            o[1] = theta.sin() * psi.sin();
        }
        o[target_dim] = theta.cos();
    }))
}

/// Phase `phi(t, x) = s·x + A exp(-sum (pi/(2a_i))^2 t) prod cos(pi x_i / (2 a_i))`,
/// a heat-equation solution with time-independent values on the box boundary.
pub fn great_circle_phase(half_widths: &[f64], slope: &[f64], amplitude: f64, t: f64, x: &[f64]) -> f64 {
    let rate: f64 = half_widths.iter().map(|a| (PI / (2.0 * a)).powi(2)).sum();
    let mode: f64 = x
        .iter()
        .zip(half_widths)
        .map(|(xi, a)| (PI * xi / (2.0 * a)).cos())
        .product();
    let lin: f64 = slope.iter().zip(x).map(|(s, x)| s * x).sum();
    lin + amplitude * (-rate * t).exp() * mode
}

/// Great-circle map at time `t` of the exact phase.
pub fn make_great_circle(
    grid: &Arc<DomainGrid>,
    slope: &[f64],
    amplitude: f64,
    target_dim: usize,
    t: f64,
) -> Result<SphereField> {
    let DomainShape::Box { half_widths } = &grid.spec().shape else {
        return Err(Error::UnsupportedScenario("great-circle data needs a box domain".into()));
    };
    if slope.len() != grid.dim() {
        return Err(Error::Config(format!(
            "slope has {} entries for dimension {}",
            slope.len(),
            grid.dim()
        )));
    }
    if target_dim < 1 {
        return Err(Error::Config("target dimension must be >= 1".into()));
    }
    let hw = half_widths.clone();
    Ok(SphereField::from_fn(grid.clone(), target_dim + 1, t, |x, o| {
        let phi = great_circle_phase(&hw, slope, amplitude, t, x);
        o.iter_mut().for_each(|v| *v = 0.0);
        o[0] = phi.cos();
        o[1] = phi.sin();
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    fn ball(n: usize) -> Arc<DomainGrid> {
        Arc::new(build_grid(DomainSpec::unit_ball(3, n)).unwrap())
    }

    #[test]
    fn equator_values() {
        let g = ball(11);
        let u = make_equator_map(&g).unwrap();
        let i = g.nearest_node(&[1.0, 0.0, 0.0]);
        assert_eq!(u.at(i), &[1.0, 0.0, 0.0]);
        let i = g.nearest_node(&[0.4, 0.2, 0.0]);
        let p = g.coords(i);
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        assert!((u.at(i)[0] - p[0] / r).abs() < 1e-15);
        assert_eq!(u.at(equator_origin_node(&g).unwrap()), &[0.0, 0.0, 1.0]);
        assert!(u.sphere_defect() < 1e-15);
        let g2 = Arc::new(build_grid(DomainSpec::unit_ball(2, 11)).unwrap());
        assert!(matches!(make_equator_map(&g2), Err(Error::UnsupportedScenario(_))));
    }

    #[test]
    fn cap_minimum_is_cos_theta0() {
        let g = ball(17);
        let u = make_cap_map(&g, PI / 3.0, 2).unwrap();
        assert!((u.min_last() - 0.5).abs() < 1e-12);
        assert!(u.sphere_defect() < 1e-15);
        assert!(make_cap_map(&g, PI / 2.0, 2).is_err());
        let tiny = make_cap_map(&g, 1e-9, 2).unwrap();
        assert!(tiny.min_last() > 1.0 - 1e-17 - 1e-16);
    }

    #[test]
    fn smoothed_equator_contract() {
        let g = ball(17);
        let rho = 0.3;
        let u = make_smoothed_equator(&g, rho).unwrap();
        let eq = make_equator_map(&g).unwrap();
        for i in 0..g.node_count() {
            if crate::field::norm(&g.coords(i)) >= rho {
                assert_eq!(u.at(i), eq.at(i));
            }
        }
        assert!(u.sup_norm() <= 1.0 + 1e-15);
        assert!(make_smoothed_equator(&g, 0.6).is_err());
    }

    #[test]
    fn great_circle_phase_solves_heat_equation() {
        let hw = [1.0, 0.5, 2.0];
        let s = [0.3, -0.2, 0.1];
        let x = [0.2, 0.1, -0.7];
        let (t, e) = (0.05, 1e-4);
        let dt = (great_circle_phase(&hw, &s, 0.8, t + e, &x)
            - great_circle_phase(&hw, &s, 0.8, t - e, &x))
            / (2.0 * e);
        let mut lap = 0.0;
        for a in 0..3 {
            let mut p = x;
            let mut m = x;
            p[a] += e;
            m[a] -= e;
            lap += (great_circle_phase(&hw, &s, 0.8, t, &p) - 2.0 * great_circle_phase(&hw, &s, 0.8, t, &x)
                + great_circle_phase(&hw, &s, 0.8, t, &m))
                / (e * e);
        }
        assert!((dt - lap).abs() < 1e-5);
    }
}
