//! Periodic spatial grids, velocity grids and cell-averaged scalar fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// A uniform periodic grid on `[0, L_1) x ... x [0, L_N)`, `N` in {1, 2}.
///
/// Cells are indexed axis-0 fastest: `j = i0 + n0 * i1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    cells: Vec<usize>,
    lengths: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(cells: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if cells.is_empty() || cells.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                cells.len()
            )));
        }
        if cells.len() != lengths.len() {
            return Err(Error::InvalidGrid(
                "cells and lengths must have the same number of axes".into(),
            ));
        }
        if let Some(axis) = cells.iter().position(|&n| n == 0) {
            return Err(Error::InvalidGrid(format!("axis {axis} has no cells")));
        }
        if let Some(axis) = lengths.iter().position(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "axis {axis} has non-positive length {}",
                lengths[axis]
            )));
        }
        Ok(Self { cells, lengths })
    }

    pub fn uniform_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length])
    }

    pub fn uniform_2d(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n, n], vec![length, length])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_size(a)).product()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Per-axis indices of the flat cell index `j`.
    pub fn multi_index(&self, j: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = j;
        for (a, &n) in self.cells.iter().enumerate() {
            idx[a] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] + self.cells[0] * idx[1],
        }
    }

    /// Cell center of flat cell `j`; unused axes are zero.
    pub fn center(&self, j: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(j);
        let mut c = [0.0; MAX_DIM];
        for (a, ca) in c.iter_mut().enumerate().take(self.dim()) {
            *ca = (idx[a] as f64 + 0.5) * self.cell_size(a);
        }
        c
    }

    /// Wraps a coordinate into `[0, L_axis)`.
    pub fn wrap(&self, axis: usize, x: f64) -> f64 {
        let l = self.lengths[axis];
        let w = x.rem_euclid(l);
        // rem_euclid can round up to exactly l
        if w >= l {
            0.0
        } else {
            w
        }
    }

    /// Periodic distance of a point from the domain center.
    pub fn distance_from_center(&self, p: &[f64; MAX_DIM]) -> f64 {
        let mut d2 = 0.0;
        for a in 0..self.dim() {
            let l = self.lengths[a];
            let mut d = (p[a] - 0.5 * l).rem_euclid(l);
            if d > 0.5 * l {
                d -= l;
            }
            d2 += d * d;
        }
        d2.sqrt()
    }
}

/// Uniform velocity grid with an edge exactly at `xi = 0`.
///
/// Edges are `(i - n_negative) * dxi` for `i = 0..=n_cells`, so every cell
/// lies entirely on one side of zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    dxi: f64,
    n_negative: usize,
    n_positive: usize,
}

impl VelocityGrid {
    /// Grid on `[xi_min, xi_max]` with `n_cells` cells. Zero must fall on an edge.
    pub fn new(xi_min: f64, xi_max: f64, n_cells: usize) -> Result<Self> {
        if !(xi_min.is_finite() && xi_max.is_finite()) || xi_min >= 0.0 || xi_max <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "velocity bounds must satisfy xi_min < 0 < xi_max, got [{xi_min}, {xi_max}]"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(
                "velocity grid needs at least 2 cells".into(),
            ));
        }
        let dxi = (xi_max - xi_min) / n_cells as f64;
        let neg = -xi_min / dxi;
        let n_negative = neg.round();
        if (neg - n_negative).abs() > 1e-9 * neg.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "xi = 0 is not a cell edge of [{xi_min}, {xi_max}] with {n_cells} cells"
            )));
        }
        let n_negative = n_negative as usize;
        Self::from_spacing(dxi, n_negative, n_cells - n_negative)
    }

    /// Symmetric grid on `[-bound, bound]`; `n_cells` must be even.
    pub fn symmetric(bound: f64, n_cells: usize) -> Result<Self> {
        if !n_cells.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "symmetric velocity grid needs an even cell count, got {n_cells}"
            )));
        }
        Self::new(-bound, bound, n_cells)
    }

    pub fn from_spacing(dxi: f64, n_negative: usize, n_positive: usize) -> Result<Self> {
        if !(dxi.is_finite() && dxi > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "velocity spacing {dxi} must be positive"
            )));
        }
        if n_negative == 0 || n_positive == 0 {
            return Err(Error::InvalidGrid(
                "velocity grid needs cells on both sides of 0".into(),
            ));
        }
        Ok(Self {
            dxi,
            n_negative,
            n_positive,
        })
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn n_cells(&self) -> usize {
        self.n_negative + self.n_positive
    }

    pub fn n_negative(&self) -> usize {
        self.n_negative
    }

    pub fn n_positive(&self) -> usize {
        self.n_positive
    }

    /// Index of the edge located at `xi = 0`.
    pub fn zero_edge(&self) -> usize {
        self.n_negative
    }

    pub fn xi_min(&self) -> f64 {
        -(self.n_negative as f64) * self.dxi
    }

    pub fn xi_max(&self) -> f64 {
        self.n_positive as f64 * self.dxi
    }

    pub fn edge(&self, i: usize) -> f64 {
        (i as f64 - self.n_negative as f64) * self.dxi
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_cells()).map(|i| self.edge(i)).collect()
    }

    pub fn cell_bounds(&self, l: usize) -> (f64, f64) {
        (self.edge(l), self.edge(l + 1))
    }

    pub fn midpoint(&self, l: usize) -> f64 {
        (l as f64 + 0.5 - self.n_negative as f64) * self.dxi
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.xi_min() && u <= self.xi_max()
    }

    /// Same spacing, range grown by `factor` on both sides (rounded up to whole cells).
    pub fn widened(&self, factor: f64) -> Self {
        let grow = |n: usize| ((n as f64 * factor).ceil() as usize).max(n + 1);
        Self {
            dxi: self.dxi,
            n_negative: grow(self.n_negative),
            n_positive: grow(self.n_positive),
        }
    }

    /// Smallest grid with this spacing that covers `[lo, hi]`.
    pub fn covering(&self, lo: f64, hi: f64) -> Self {
        let n_neg = ((-lo.min(0.0)) / self.dxi).ceil() as usize;
        let n_pos = (hi.max(0.0) / self.dxi).ceil() as usize;
        Self {
            dxi: self.dxi,
            n_negative: n_neg.max(self.n_negative),
            n_positive: n_pos.max(self.n_positive),
        }
    }
}

/// Cell-averaged scalar field on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values".into(),
                reason: format!("non-finite value at cell {j}"),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(&[f64; MAX_DIM]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|j| f(&grid.center(j))).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_parts_unchecked(grid: SpatialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
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

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_j u_j |cell|`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Periodic multilinear interpolation between cell centers.
    pub fn interpolate(&self, p: &[f64; MAX_DIM]) -> f64 {
        let g = &self.grid;
        match g.dim() {
            1 => {
                let n = g.cells[0];
                let s = p[0] / g.cell_size(0) - 0.5;
                let i0 = s.floor();
                let w = s - i0;
                let i0 = (i0 as i64).rem_euclid(n as i64) as usize;
                let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
                (1.0 - w) * self.values[i0] + w * self.values[i1]
            }
            _ => {
                let (n0, n1) = (g.cells[0], g.cells[1]);
                let s0 = p[0] / g.cell_size(0) - 0.5;
                let s1 = p[1] / g.cell_size(1) - 0.5;
                let (f0, f1) = (s0.floor(), s1.floor());
                let (w0, w1) = (s0 - f0, s1 - f1);
                let a0 = (f0 as i64).rem_euclid(n0 as i64) as usize;
                let a1 = (f1 as i64).rem_euclid(n1 as i64) as usize;
                let b0 = if a0 + 1 == n0 { 0 } else { a0 + 1 };
                let b1 = if a1 + 1 == n1 { 0 } else { a1 + 1 };
                let v = |i: usize, k: usize| self.values[i + n0 * k];
                (1.0 - w1) * ((1.0 - w0) * v(a0, a1) + w0 * v(b0, a1))
                    + w1 * ((1.0 - w0) * v(a0, b1) + w0 * v(b0, b1))
            }
        }
    }

    pub(crate) fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "fields live on different spatial grids".into(),
            ));
        }
        Ok(())
    }
}
