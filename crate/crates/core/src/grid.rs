//! Uniform cell-centered grids.
//!
//! A [`Grid`] partitions `[x_min, x_max]` into `n` cells of width
//! `dx = (x_max - x_min) / n`; cell `j` has center `x_min + (j + 1/2) dx`.
//! Densities are stored as one value per cell and interpreted as piecewise
//! constant, so cell masses are `value * dx` and the CDF is piecewise linear.
//! A [`Grid2`] is the tensor product of two 1-d grids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from grid construction.
#[derive(Debug, Error)]
pub enum GridError {
    /// Fewer than the minimum number of cells.
    #[error("grid needs at least {min} cells, got {got}")]
    TooFewCells {
        /// Minimum admissible cell count.
        min: usize,
        /// Requested cell count.
        got: usize,
    },
    /// Upper end does not exceed lower end.
    #[error("grid extent is empty or inverted: [{x_min}, {x_max}]")]
    EmptyExtent {
        /// Requested lower end.
        x_min: f64,
        /// Requested upper end.
        x_max: f64,
    },
    /// A non-finite endpoint.
    #[error("grid endpoints must be finite: [{x_min}, {x_max}]")]
    NonFiniteExtent {
        /// Requested lower end.
        x_min: f64,
        /// Requested upper end.
        x_max: f64,
    },
}

/// Minimum number of cells in a [`Grid`].
pub const MIN_CELLS: usize = 8;

/// A uniform cell-centered grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    /// Build a grid with `n >= 8` cells on a nonempty finite interval.
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, GridError> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(GridError::NonFiniteExtent { x_min, x_max });
        }
        if x_max <= x_min {
            return Err(GridError::EmptyExtent { x_min, x_max });
        }
        if n < MIN_CELLS {
            return Err(GridError::TooFewCells { min: MIN_CELLS, got: n });
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Lower end of the covered interval.
    #[must_use]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    /// Upper end of the covered interval.
    #[must_use]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of cells.
    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell width.
    #[must_use]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    /// Center of cell `j`.
    #[must_use]
    pub fn center(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    /// Left edge of cell `j`; `j == n` gives the right end of the grid.
    #[must_use]
    pub fn left_edge(&self, j: usize) -> f64 {
        debug_assert!(j <= self.n);
        self.x_min + j as f64 * self.dx()
    }

    /// All cell centers, in order.
    #[must_use]
    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.center(j)).collect()
    }

    /// Whether `x` lies in the covered interval.
    #[must_use]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the cell containing `x`, clamped to the boundary cells.
    #[must_use]
    pub fn cell_of(&self, x: f64) -> usize {
        let raw = ((x - self.x_min) / self.dx()).floor();
        if raw < 0.0 {
            0
        } else {
            (raw as usize).min(self.n - 1)
        }
    }

    /// A grid over the same interval with each cell split in two.
    #[must_use]
    pub fn refined(&self) -> Self {
        Self { x_min: self.x_min, x_max: self.x_max, n: self.n * 2 }
    }
}

/// Tensor product of two 1-d grids; cell `(i, j)` has center
/// `(x.center(i), y.center(j))` and values are stored row-major in `y`
/// (index `j * x.n() + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    /// Grid along the first coordinate.
    pub x: Grid,
    /// Grid along the second coordinate.
    pub y: Grid,
}

impl Grid2 {
    /// Build the tensor grid.
    #[must_use]
    pub fn new(x: Grid, y: Grid) -> Self {
        Self { x, y }
    }

    /// Total number of cells.
    #[must_use]
    pub fn len(&self) -> usize {
        self.x.n() * self.y.n()
    }

    /// Whether the grid has no cells (it never does; for lint symmetry).
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell area `dx * dy`.
    #[must_use]
    pub fn cell_area(&self) -> f64 {
        self.x.dx() * self.y.dx()
    }

    /// Flat index of cell `(i, j)`.
    #[must_use]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.x.n() && j < self.y.n());
        j * self.x.n() + i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn centers_are_cell_midpoints() {
        let g = Grid::new(-1.0, 1.0, 10).unwrap();
        assert_relative_eq!(g.dx(), 0.2);
        assert_relative_eq!(g.center(0), -0.9);
        assert_relative_eq!(g.center(9), 0.9);
        assert_relative_eq!(g.left_edge(0), -1.0);
        assert_relative_eq!(g.left_edge(10), 1.0);
    }

    #[test]
    fn rejects_degenerate_extents() {
        assert!(matches!(Grid::new(0.0, 0.0, 16), Err(GridError::EmptyExtent { .. })));
        assert!(matches!(Grid::new(1.0, 0.0, 16), Err(GridError::EmptyExtent { .. })));
        assert!(matches!(
            Grid::new(0.0, f64::INFINITY, 16),
            Err(GridError::NonFiniteExtent { .. })
        ));
        assert!(matches!(Grid::new(0.0, 1.0, 7), Err(GridError::TooFewCells { .. })));
        assert!(Grid::new(0.0, 1.0, 8).is_ok());
    }

    #[test]
    fn cell_lookup_matches_centers() {
        let g = Grid::new(-2.0, 3.0, 25).unwrap();
        for j in 0..g.n() {
            assert_eq!(g.cell_of(g.center(j)), j);
        }
        assert_eq!(g.cell_of(-10.0), 0);
        assert_eq!(g.cell_of(10.0), g.n() - 1);
    }

    #[test]
    fn refinement_preserves_extent() {
        let g = Grid::new(-4.0, 4.0, 64).unwrap();
        let r = g.refined();
        assert_eq!(r.n(), 128);
        assert_relative_eq!(r.dx(), g.dx() / 2.0);
        assert_relative_eq!(r.x_min(), g.x_min());
        assert_relative_eq!(r.x_max(), g.x_max());
    }
}
