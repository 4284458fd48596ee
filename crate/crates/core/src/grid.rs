//! Uniform Cartesian discretization of the spatial domain.
//!
//! Nodes are stored row-major: axis 0 varies slowest. The ball is embedded
//! in its bounding box `[-1, 1]^d` as a staircase: nodes strictly inside the
//! ball are interior, outside nodes with an interior axis neighbour carry the
//! Dirichlet data, and everything else is exterior and never read.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainShape {
    /// Unit ball centred at the origin.
    UnitBall,
    /// Axis-aligned box `[-a_0, a_0] x ... x [-a_{d-1}, a_{d-1}]`.
    Box { half_widths: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    pub shape: DomainShape,
    /// Nodes per axis; odd so that the origin is a node.
    pub n: usize,
}

impl DomainSpec {
    pub fn unit_ball(dim: usize, n: usize) -> Self {
        Self {
            dim,
            shape: DomainShape::UnitBall,
            n,
        }
    }

    pub fn cube(dim: usize, half_width: f64, n: usize) -> Self {
        Self {
            dim,
            shape: DomainShape::Box {
                half_widths: vec![half_width; dim],
            },
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!("dimension d = {} must be >= 2", self.dim)));
        }
        if self.n < 5 || self.n % 2 == 0 {
            return Err(Error::Config(format!(
                "grid resolution n = {} must be odd and >= 5",
                self.n
            )));
        }
        if let DomainShape::Box { half_widths } = &self.shape {
            if half_widths.len() != self.dim {
                return Err(Error::Config(format!(
                    "box has {} half-widths for dimension {}",
                    half_widths.len(),
                    self.dim
                )));
            }
            if half_widths.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(Error::Config("box half-widths must be positive".into()));
            }
        }
        Ok(())
    }

    fn half_width(&self, axis: usize) -> f64 {
        match &self.shape {
            DomainShape::UnitBall => 1.0,
            DomainShape::Box { half_widths } => half_widths[axis],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeClass::Interior => "interior",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct DomainGrid {
    spec: DomainSpec,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    classes: Vec<NodeClass>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

pub fn build_grid(spec: DomainSpec) -> Result<DomainGrid> {
    DomainGrid::new(spec)
}

impl DomainGrid {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim;
        let n = spec.n;
        let spacing: Vec<f64> = (0..d)
            .map(|a| 2.0 * spec.half_width(a) / (n - 1) as f64)
            .collect();
        let mut strides = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * n;
        }
        let total = n.pow(d as u32);

        // Ball membership is decided in integer arithmetic:
        // |x| < 1  <=>  sum (2k - (n-1))^2 < (n-1)^2.
        let m = (n - 1) as i64;
        let mut inside = vec![false; total];
        let mut idx = vec![0usize; d];
        for (node, flag) in inside.iter_mut().enumerate() {
            decompose(node, n, &mut idx);
            *flag = match &spec.shape {
                DomainShape::UnitBall => {
                    let s: i64 = idx
                        .iter()
                        .map(|&k| {
                            let c = 2 * k as i64 - m;
                            c * c
                        })
                        .sum();
                    s < m * m
                }
                DomainShape::Box { .. } => idx.iter().all(|&k| k > 0 && k < n - 1),
            };
        }

        let mut classes = vec![NodeClass::Exterior; total];
        for node in 0..total {
            if inside[node] {
                classes[node] = NodeClass::Interior;
                continue;
            }
            decompose(node, n, &mut idx);
            let touches = match &spec.shape {
                DomainShape::Box { .. } => true,
                DomainShape::UnitBall => (0..d).any(|a| {
                    (idx[a] > 0 && inside[node - strides[a]])
                        || (idx[a] + 1 < n && inside[node + strides[a]])
                }),
            };
            if touches {
                classes[node] = NodeClass::Boundary;
            }
        }
        let interior = (0..total)
            .filter(|&i| classes[i] == NodeClass::Interior)
            .collect();
        let boundary = (0..total)
            .filter(|&i| classes[i] == NodeClass::Boundary)
            .collect();
        Ok(Self {
            spec,
            spacing,
            strides,
            classes,
            interior,
            boundary,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn node_count(&self) -> usize {
        self.classes.len()
    }

    /// Smallest spacing over the axes.
    pub fn h(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.classes[node]
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.classes[node] != NodeClass::Exterior
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        let k = (node / self.strides[axis]) % self.spec.n;
        -self.spec.half_width(axis) + k as f64 * self.spacing[axis]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(node, a)).collect()
    }

    pub fn dist_sq(&self, node: usize, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|a| {
                let dx = self.coord(node, a) - x[a];
                dx * dx
            })
            .sum()
    }

    /// Axis neighbour in direction `+1` or `-1`, if it lies on the lattice.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> Option<usize> {
        let k = (node / self.strides[axis]) % self.spec.n;
        if forward {
            (k + 1 < self.spec.n).then(|| node + self.strides[axis])
        } else {
            (k > 0).then(|| node - self.strides[axis])
        }
    }

    /// Node whose coordinates are nearest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let n = self.spec.n;
        (0..self.dim())
            .map(|a| {
                let k = ((x[a] + self.spec.half_width(a)) / self.spacing[a]).round();
                let k = k.clamp(0.0, (n - 1) as f64) as usize;
                k * self.strides[a]
            })
            .sum()
    }

    /// Quadrature weight: full cell volume at interior nodes, half at box
    /// boundary nodes (which sit on the boundary), zero for ball boundary
    /// nodes (which sit just outside the ball) and exterior nodes.
    pub fn weight(&self, node: usize) -> f64 {
        match self.classes[node] {
            NodeClass::Interior => self.cell_volume(),
            NodeClass::Boundary => match self.spec.shape {
                DomainShape::Box { .. } => 0.5 * self.cell_volume(),
                DomainShape::UnitBall => 0.0,
            },
            NodeClass::Exterior => 0.0,
        }
    }

    /// Distance from `x` to the continuous boundary, for `x` in the closed domain.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match &self.spec.shape {
            DomainShape::UnitBall => (1.0 - x.iter().map(|v| v * v).sum::<f64>().sqrt()).abs(),
            DomainShape::Box { half_widths } => half_widths
                .iter()
                .zip(x)
                .map(|(a, v)| (a - v.abs()).abs())
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn same_grid(&self, other: &DomainGrid) -> bool {
        self.spec == other.spec
    }

    pub fn ensure_same(&self, other: &DomainGrid) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.spec, other.spec
            )))
        }
    }
}

fn decompose(mut node: usize, n: usize, out: &mut [usize]) {
    for a in (0..out.len()).rev() {
        out[a] = node % n;
        node /= n;
    }
}
