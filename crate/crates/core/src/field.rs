use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::DomainGrid;

/// Node-indexed array of vectors in `R^{D+1}`, stored node-major.
#[derive(Debug, Clone)]
pub struct SphereField {
    grid: Arc<DomainGrid>,
    ncomp: usize,
    values: Vec<f64>,
    pub t: f64,
}

impl SphereField {
    pub fn zeros(grid: Arc<DomainGrid>, ncomp: usize, t: f64) -> Self {
        let len = grid.node_count() * ncomp;
        Self {
            grid,
            ncomp,
            values: vec![0.0; len],
            t,
        }
    }

    pub fn from_values(grid: Arc<DomainGrid>, ncomp: usize, values: Vec<f64>, t: f64) -> Result<Self> {
        if ncomp == 0 || values.len() != grid.node_count() * ncomp {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes x {} components",
                values.len(),
                grid.node_count(),
                ncomp
            )));
        }
        Ok(Self {
            grid,
            ncomp,
            values,
            t,
        })
    }

    /// Evaluates `f(x, out)` at every node.
    pub fn from_fn(
        grid: Arc<DomainGrid>,
        ncomp: usize,
        t: f64,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Self {
        let mut field = Self::zeros(grid, ncomp, t);
        let mut x = vec![0.0; field.grid.dim()];
        for node in 0..field.grid.node_count() {
            for (a, xa) in x.iter_mut().enumerate() {
                *xa = field.grid.coord(node, a);
            }
            f(&x, &mut field.values[node * ncomp..(node + 1) * ncomp]);
        }
        field
    }

    pub fn constant(grid: Arc<DomainGrid>, value: &[f64], t: f64) -> Self {
        Self::from_fn(grid, value.len(), t, |_, out| out.copy_from_slice(value))
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// Target sphere dimension `D` (one less than the ambient dimension).
    pub fn target_dim(&self) -> usize {
        self.ncomp - 1
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    #[inline]
    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn norm_at(&self, node: usize) -> f64 {
        norm(self.at(node))
    }

    pub fn ensure_compatible(&self, other: &SphereField) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.ncomp != other.ncomp {
            return Err(Error::GridMismatch(format!(
                "component counts {} vs {}",
                self.ncomp, other.ncomp
            )));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(pos) => Err(Error::NonFinite {
                node: pos / self.ncomp,
            }),
            None => Ok(()),
        }
    }

    /// Largest node norm over interior and boundary nodes.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.node_count())
            .filter(|&i| self.grid.is_active(i))
            .map(|i| self.norm_at(i))
            .fold(0.0, f64::max)
    }

    /// Largest `| |u| - 1 |` over interior and boundary nodes.
    pub fn sphere_defect(&self) -> f64 {
        (0..self.grid.node_count())
            .filter(|&i| self.grid.is_active(i))
            .map(|i| (self.norm_at(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest last ambient component over interior and boundary nodes.
    pub fn min_last(&self) -> f64 {
        (0..self.grid.node_count())
            .filter(|&i| self.grid.is_active(i))
            .map(|i| self.at(i)[self.ncomp - 1])
            .fold(f64::INFINITY, f64::min)
    }

    /// Applies a linear map `R^{D+1} -> R^{D+1}` (row-major matrix) node-wise.
    pub fn map_linear(&self, matrix: &[f64]) -> SphereField {
        let k = self.ncomp;
        assert_eq!(matrix.len(), k * k);
        let mut out = self.clone();
        for node in 0..self.grid.node_count() {
            let src = self.at(node);
            let dst = out.at_mut(node);
            for r in 0..k {
                dst[r] = (0..k).map(|c| matrix[r * k + c] * src[c]).sum();
            }
        }
        out
    }

    /// Writes the `sphereflow-field v1` snapshot format.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "sphereflow-field v1 d={} D={} n={} t={}",
            self.grid.dim(),
            self.target_dim(),
            self.grid.n(),
            self.t
        )?;
        let mut line = String::new();
        for node in 0..self.grid.node_count() {
            line.clear();
            for (c, v) in self.at(node).iter().enumerate() {
                if c > 0 {
                    line.push(' ');
                }
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a snapshot written by [`SphereField::write_snapshot`]; the grid
    /// must match the header.
    pub fn read_snapshot<R: BufRead>(grid: Arc<DomainGrid>, r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty snapshot".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let header = parse_header(&header)?;
        if header.d != grid.dim() || header.n != grid.n() {
            return Err(Error::GridMismatch(format!(
                "snapshot d={} n={} vs grid d={} n={}",
                header.d,
                header.n,
                grid.dim(),
                grid.n()
            )));
        }
        let ncomp = header.target_dim + 1;
        let mut values = Vec::with_capacity(grid.node_count() * ncomp);
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("node line {row}: {e}")))?,
                );
            }
            if values.len() - before != ncomp {
                return Err(Error::Parse(format!(
                    "node line {row}: expected {ncomp} values"
                )));
            }
        }
        Self::from_values(grid, ncomp, values, header.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub d: usize,
    pub target_dim: usize,
    pub n: usize,
    pub t: f64,
}

pub fn parse_header(line: &str) -> Result<SnapshotHeader> {
    let mut it = line.split_whitespace();
    if it.next() != Some("sphereflow-field") || it.next() != Some("v1") {
        return Err(Error::Parse(format!("bad snapshot header: {line}")));
    }
    let mut d = None;
    let mut target_dim = None;
    let mut n = None;
    let mut t = None;
    for tok in it {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token {tok}")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("header {k}: {e}"));
        match k {
            "d" => d = Some(v.parse().map_err(|e| bad(&e))?),
            "D" => target_dim = Some(v.parse().map_err(|e| bad(&e))?),
            "n" => n = Some(v.parse().map_err(|e| bad(&e))?),
            "t" => t = Some(v.parse().map_err(|e| bad(&e))?),
            _ => return Err(Error::Parse(format!("unknown header key {k}"))),
        }
    }
    match (d, target_dim, n, t) {
        (Some(d), Some(target_dim), Some(n), Some(t)) => Ok(SnapshotHeader {
            d,
            target_dim,
            n,
            t,
        }),
        _ => Err(Error::Parse(format!("incomplete snapshot header: {line}"))),
    }
}

/// Per-node scalar quantity on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<DomainGrid>,
    values: Vec<f64>,
    pub t: f64,
}

impl ScalarField {
    pub fn new(grid: Arc<DomainGrid>, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, values, t })
    }

    pub fn from_fn(grid: Arc<DomainGrid>, t: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(&grid.coords(i))).collect();
        Self { grid, values, t }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Maximum over interior and boundary nodes.
    pub fn max_active(&self) -> f64 {
        (0..self.grid.node_count())
            .filter(|&i| self.grid.is_active(i))
            .map(|i| self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
