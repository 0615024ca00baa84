//! Uniform truncated space-time lattice and scalar fields living on it.
//!
//! Space is `[-L, L]^dim` with `nx` nodes per axis (odd, so the origin is a
//! node); time is `[0, T]` with `nt` uniform steps. Nodes of a 2D grid are
//! stored row-major: node `k = j * nx + i` sits at `(x_i, x_j)`.

use serde::Serialize;

use crate::error::GridError;

/// Default truncation half-width for data with O(1) spread.
pub const DEFAULT_HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    nx: usize,
    nt: usize,
    horizon: f64,
}

/// A line of nodes along one axis, addressed as `start + s * stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Line {
    pub start: usize,
    pub stride: usize,
}

impl Line {
    #[inline]
    pub fn node(&self, s: usize) -> usize {
        self.start + s * self.stride
    }
}

impl Grid {
    pub fn new(
        dim: usize,
        half_width: f64,
        nx: usize,
        nt: usize,
        horizon: f64,
    ) -> Result<Self, GridError> {
        if !(dim == 1 || dim == 2) {
            return Err(GridError::UnsupportedDimension(dim));
        }
        if nx < 3 || nx.is_multiple_of(2) {
            return Err(GridError::BadNodeCount(nx));
        }
        if nt == 0 {
            return Err(GridError::BadStepCount);
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(GridError::BadHorizon(horizon));
        }
        Ok(Self {
            dim,
            half_width,
            nx,
            nt,
            horizon,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    /// Total number of spatial nodes, `nx^dim`.
    pub fn n_nodes(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    /// Coordinate of the `i`-th node along any axis. Symmetric about 0 exactly.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        let centre = ((self.nx - 1) / 2) as f64;
        (i as f64 - centre) * self.dx()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.coord(i)).collect()
    }

    /// Position of node `k`; unused trailing components are zero.
    #[inline]
    pub fn point(&self, k: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coord(k), 0.0],
            _ => [self.coord(k % self.nx), self.coord(k / self.nx)],
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| self.time(n)).collect()
    }

    /// One-dimensional control-volume widths: `dx` inside, `dx/2` at the ends.
    pub fn axis_volumes(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut v = vec![dx; self.nx];
        v[0] = 0.5 * dx;
        v[self.nx - 1] = 0.5 * dx;
        v
    }

    /// Trapezoid quadrature weights for every node (tensor product in 2D).
    pub fn spatial_weights(&self) -> Vec<f64> {
        let axis = self.axis_volumes();
        match self.dim {
            1 => axis,
            _ => {
                let mut w = Vec::with_capacity(self.n_nodes());
                for j in 0..self.nx {
                    for i in 0..self.nx {
                        w.push(axis[i] * axis[j]);
                    }
                }
                w
            }
        }
    }

    /// Trapezoid weights over the `nt + 1` time levels.
    pub fn time_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.nt + 1];
        w[0] = 0.5 * dt;
        w[self.nt] = 0.5 * dt;
        w
    }

    /// All node lines running along `axis`.
    pub fn lines(&self, axis: usize) -> Vec<Line> {
        assert!(axis < self.dim, "axis {axis} out of range");
        match (self.dim, axis) {
            (1, _) => vec![Line {
                start: 0,
                stride: 1,
            }],
            (_, 0) => (0..self.nx)
                .map(|j| Line {
                    start: j * self.nx,
                    stride: 1,
                })
                .collect(),
            _ => (0..self.nx)
                .map(|i| Line {
                    start: i,
                    stride: self.nx,
                })
                .collect(),
        }
    }

    /// Same domain with `2nx - 1` nodes and `2nt` steps, so every old node survives.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            nt: 2 * self.nt,
            ..*self
        }
    }

    pub fn with_time(&self, horizon: f64, nt: usize) -> Result<Self, GridError> {
        Self::new(self.dim, self.half_width, self.nx, nt, horizon)
    }
}

/// Scalar values on every (time level, node) pair, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; (grid.nt() + 1) * grid.n_nodes()],
        }
    }

    /// Builds a field from `f(n, k)` over time level `n` and node `k`.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let nodes = grid.n_nodes();
        let mut values = Vec::with_capacity((grid.nt() + 1) * nodes);
        for n in 0..=grid.nt() {
            for k in 0..nodes {
                values.push(f(n, k));
            }
        }
        Self { grid, values }
    }

    pub fn from_slices(grid: Grid, slices: Vec<Vec<f64>>) -> Result<Self, GridError> {
        let nodes = grid.n_nodes();
        if slices.len() != grid.nt() + 1 || slices.iter().any(|s| s.len() != nodes) {
            return Err(GridError::ShapeMismatch);
        }
        Ok(Self {
            grid,
            values: slices.into_iter().flatten().collect(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_times(&self) -> usize {
        self.grid.nt() + 1
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let nodes = self.grid.n_nodes();
        &self.values[n * nodes..(n + 1) * nodes]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let nodes = self.grid.n_nodes();
        &mut self.values[n * nodes..(n + 1) * nodes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Space-time trapezoid integral of `g(value)`.
    pub fn integrate_with(&self, g: impl Fn(f64) -> f64) -> f64 {
        let ws = self.grid.spatial_weights();
        let wt = self.grid.time_weights();
        (0..self.n_times())
            .map(|n| {
                wt[n]
                    * self
                        .slice(n)
                        .iter()
                        .zip(&ws)
                        .map(|(&v, &w)| w * g(v))
                        .sum::<f64>()
            })
            .sum()
    }

    /// Space-time L¹ distance to another field on the same grid.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let ws = self.grid.spatial_weights();
        let wt = self.grid.time_weights();
        (0..self.n_times())
            .map(|n| {
                wt[n]
                    * self
                        .slice(n)
                        .iter()
                        .zip(other.slice(n))
                        .zip(&ws)
                        .map(|((a, b), w)| w * (a - b).abs())
                        .sum::<f64>()
            })
            .sum()
    }

    /// `(1 - theta) * self + theta * other`.
    pub fn blend(&self, other: &Self, theta: f64) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_node_counts() {
        assert!(matches!(
            Grid::new(1, 1.0, 4, 10, 1.0),
            Err(GridError::BadNodeCount(4))
        ));
        assert!(Grid::new(3, 1.0, 5, 10, 1.0).is_err());
        assert!(Grid::new(1, 1.0, 5, 0, 1.0).is_err());
        assert!(Grid::new(1, 1.0, 5, 1, -1.0).is_err());
    }

    #[test]
    fn origin_is_a_node_and_coords_are_symmetric() {
        let g = Grid::new(1, 3.0, 7, 2, 1.0).unwrap();
        assert_eq!(g.coord(3), 0.0);
        assert_eq!(g.coord(0), -3.0);
        assert_eq!(g.coord(6), 3.0);
        for i in 0..7 {
            assert_eq!(g.coord(i), -g.coord(6 - i));
        }
    }

    #[test]
    fn weights_sum_to_domain_measure() {
        let g = Grid::new(2, 2.0, 9, 4, 2.0).unwrap();
        let s: f64 = g.spatial_weights().iter().sum();
        assert!((s - 16.0).abs() < 1e-12);
        let t: f64 = g.time_weights().iter().sum();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lines_cover_every_node_once() {
        let g = Grid::new(2, 1.0, 5, 1, 1.0).unwrap();
        for axis in 0..2 {
            let mut seen = vec![0; g.n_nodes()];
            for line in g.lines(axis) {
                for s in 0..g.nx() {
                    seen[line.node(s)] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn refinement_keeps_old_nodes() {
        let g = Grid::new(1, 4.0, 9, 10, 1.0).unwrap();
        let r = g.refined();
        assert_eq!(r.nx(), 17);
        assert_eq!(r.nt(), 20);
        for i in 0..9 {
            assert!((g.coord(i) - r.coord(2 * i)).abs() < 1e-14);
        }
    }
}
