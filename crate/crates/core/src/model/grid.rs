use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar parameters of the cell/nutrient system and of its discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Time-scale ratio between cell motion and nutrient consumption.
    pub eps: f64,
    /// Nutrient threshold separating growth from decay of the cells.
    pub mu: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Number of grid nodes (endpoints included).
    pub n_cells: usize,
    pub t_end: f64,
}

impl ModelParams {
    pub fn new(eps: f64, mu: f64, x_min: f64, x_max: f64, n_cells: usize, t_end: f64) -> Result<Self> {
        let p = Self {
            eps,
            mu,
            x_min,
            x_max,
            n_cells,
            t_end,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::InvalidParameter(format!(
                "x_min ({}) must be below x_max ({})",
                self.x_min, self.x_max
            )));
        }
        if self.n_cells < 3 {
            return Err(Error::InvalidParameter(format!(
                "n_cells must be >= 3, got {}",
                self.n_cells
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Node count giving spacing `eps / cells_per_eps` on `[x_min, x_max]`.
    pub fn nodes_for_resolution(x_min: f64, x_max: f64, eps: f64, cells_per_eps: f64) -> usize {
        let dx = eps / cells_per_eps;
        (((x_max - x_min) / dx).round() as usize + 1).max(3)
    }

    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.x_min, self.x_max, self.n_cells)
    }
}

/// Uniform grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Self {
        assert!(n >= 2 && x_min < x_max, "degenerate grid");
        Self {
            x_min,
            x_max,
            n,
            dx: (x_max - x_min) / (n - 1) as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Index of the node closest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        (i.max(0.0) as usize).min(self.n - 1)
    }

    /// Indices of the nodes with `|x| <= radius`.
    pub fn indices_within(&self, radius: f64) -> std::ops::Range<usize> {
        let tol = 1e-9 * self.dx;
        let lo = (0..self.n).find(|&i| self.node(i) >= -radius - tol).unwrap_or(self.n);
        let hi = (0..self.n)
            .rev()
            .find(|&i| self.node(i) <= radius + tol)
            .map_or(lo, |i| i + 1);
        lo..hi.max(lo)
    }
}

/// A scalar function sampled on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Range(format!(
                "non-finite field value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid1D, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
