//! Bounded domains (intervals and axis-aligned boxes) and uniform interior grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval in 1D or axis-aligned box in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box2d { ax: f64, bx: f64, ay: f64, by: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn box2d(ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        let d = Domain::Box2d { ax, bx, ay, by };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_interval() -> Self {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn unit_square() -> Self {
        Domain::Box2d {
            ax: 0.0,
            bx: 1.0,
            ay: 0.0,
            by: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.axes() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidDomain(format!("non-finite bounds ({lo}, {hi})")));
            }
            if lo >= hi {
                return Err(Error::InvalidDomain(format!("empty axis ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box2d { .. } => 2,
        }
    }

    /// `(lower, upper)` bounds per axis.
    pub fn axes(&self) -> Vec<(f64, f64)> {
        match *self {
            Domain::Interval { a, b } => vec![(a, b)],
            Domain::Box2d { ax, bx, ay, by } => vec![(ax, bx), (ay, by)],
        }
    }

    pub fn volume(&self) -> f64 {
        self.axes().iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Euclidean distance from `x` to the boundary. For a box this is the
    /// minimum over the faces.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut d = f64::INFINITY;
        for (&xi, (lo, hi)) in x.iter().zip(self.axes()) {
            if !(xi >= lo && xi <= hi) {
                return Err(Error::OutsideDomain { point: x.to_vec() });
            }
            d = d.min(xi - lo).min(hi - xi);
        }
        Ok(d)
    }
}

/// Uniform grid of interior nodes; boundary nodes are implicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: Domain,
    pub n_per_axis: usize,
    pub h: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Domain, n_per_axis: usize) -> Result<Self> {
        domain.validate()?;
        if n_per_axis == 0 {
            return Err(Error::InvalidArgument("grid needs at least one node per axis".into()));
        }
        let h = domain
            .axes()
            .iter()
            .map(|(lo, hi)| (hi - lo) / (n_per_axis as f64 + 1.0))
            .collect();
        Ok(Grid {
            domain,
            n_per_axis,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mass weight: the volume element `h_1 * ... * h_N` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Coordinate of the `i`-th interior node along `axis`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, _) = self.domain.axes()[axis];
        lo + (i as f64 + 1.0) * self.h[axis]
    }

    /// Multi-index of a flat node index; the first axis varies fastest.
    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let n = self.n_per_axis;
        match self.dim() {
            1 => vec![node],
            _ => vec![node % n, node / n],
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        match idx {
            [i] => *i,
            [i, j] => j * self.n_per_axis + i,
            _ => unreachable!("grids are 1D or 2D"),
        }
    }

    pub fn node_point(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_coord(axis, i))
            .collect()
    }

    pub fn node_distance(&self, node: usize) -> f64 {
        self.domain
            .boundary_distance(&self.node_point(node))
            .expect("grid nodes are interior")
    }

    /// Node closest to `x` (per-axis rounding).
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        self.domain.boundary_distance(x)?;
        let idx: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(axis, &xi)| {
                let (lo, _) = self.domain.axes()[axis];
                let k = ((xi - lo) / self.h[axis]).round() as i64 - 1;
                k.clamp(0, self.n_per_axis as i64 - 1) as usize
            })
            .collect();
        Ok(self.flat_index(&idx))
    }

    /// Node at the centre of the grid (exact midpoint when `n_per_axis` is odd).
    pub fn center_node(&self) -> usize {
        let mid = self.n_per_axis / 2;
        self.flat_index(&vec![mid; self.dim()])
    }
}
