//! Tensor grids over boxes in R^d and the fields sampled on them.

mod field;
pub mod io;
mod ops;

pub use field::{DensityField, ScalarField};
pub use ops::{
    convolve, dirichlet_form, gradient, inner_product, integrate, interpolate, laplacian,
    marginalize, permutations, symmetrize,
};
pub(crate) use ops::{line_starts, line_weight, multilinear};

use crate::error::{Error, Result};
use crate::real::Real;

/// Largest number of grid axes supported (one particle per axis, N <= 4).
pub const MAX_DIMS: usize = 4;
/// Smallest admissible point count per axis.
pub const MIN_POINTS: usize = 8;

/// Axis-aligned uniform tensor grid. Nodes are stored row-major, last axis
/// fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    points: Vec<usize>,
}

impl<T: Real> UniformGrid<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, points: Vec<usize>) -> Result<Self> {
        let dims = points.len();
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::InvalidGrid(format!(
                "dimension {dims} outside 1..={MAX_DIMS}"
            )));
        }
        if lower.len() != dims || upper.len() != dims {
            return Err(Error::InvalidGrid("bounds and point counts differ in length".into()));
        }
        for a in 0..dims {
            if !(upper[a] > lower[a]) || !lower[a].is_finite() || !upper[a].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: upper bound {} must exceed lower bound {}",
                    upper[a], lower[a]
                )));
            }
            if points[a] < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: {} points, at least {MIN_POINTS} required",
                    points[a]
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            points,
        })
    }

    pub fn line(lower: T, upper: T, points: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![points])
    }

    /// `[-extent, extent]` with `points` nodes.
    pub fn symmetric_line(extent: T, points: usize) -> Result<Self> {
        Self::line(-extent, extent, points)
    }

    /// The same axis repeated `dims` times.
    pub fn cube(dims: usize, lower: T, upper: T, points: usize) -> Result<Self> {
        Self::new(vec![lower; dims], vec![upper; dims], vec![points; dims])
    }

    /// Tensor power of a one-dimensional grid.
    pub fn power(&self, n: usize) -> Result<Self> {
        if self.dims() != 1 {
            return Err(Error::InvalidGrid("tensor power needs a 1D grid".into()));
        }
        Self::cube(n, self.lower[0], self.upper[0], self.points[0])
    }

    /// Grid spanned by a subset of axes (in the given order).
    pub fn sub_grid(&self, axes: &[usize]) -> Result<Self> {
        Self::new(
            axes.iter().map(|&a| self.lower[a]).collect(),
            axes.iter().map(|&a| self.upper[a]).collect(),
            axes.iter().map(|&a| self.points[a]).collect(),
        )
    }

    pub fn axis_grid(&self, axis: usize) -> Result<Self> {
        self.sub_grid(&[axis])
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn point_counts(&self) -> &[usize] {
        &self.points
    }

    #[inline]
    pub fn lower(&self, axis: usize) -> T {
        self.lower[axis]
    }

    #[inline]
    pub fn upper(&self, axis: usize) -> T {
        self.upper[axis]
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> T {
        (self.upper[axis] - self.lower[axis]) / T::from_usize_lossy(self.points[axis] - 1)
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        (0..self.dims()).map(|a| self.spacing(a)).fold(T::one(), |acc, h| acc * h)
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims()];
        for a in (0..self.dims().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.points[a + 1];
        }
        strides
    }

    #[inline]
    pub fn coordinate(&self, axis: usize, index: usize) -> T {
        self.lower[axis] + T::from_usize_lossy(index) * self.spacing(axis)
    }

    /// Node coordinates along one axis.
    pub fn axis_nodes(&self, axis: usize) -> Vec<T> {
        (0..self.points[axis])
            .map(|i| self.coordinate(axis, i))
            .collect()
    }

    pub fn multi_index(&self, mut linear: usize, out: &mut [usize]) {
        for a in (0..self.dims()).rev() {
            out[a] = linear % self.points[a];
            linear /= self.points[a];
        }
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.points)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Trapezoid weights along one axis.
    pub fn axis_weights(&self, axis: usize) -> Vec<T> {
        let h = self.spacing(axis);
        let n = self.points[axis];
        let mut w = vec![h; n];
        w[0] = h * T::lit(0.5);
        w[n - 1] = h * T::lit(0.5);
        w
    }

    /// Tensor-product trapezoid weights, one per node.
    pub fn weights(&self) -> Vec<T> {
        let per_axis: Vec<Vec<T>> = (0..self.dims()).map(|a| self.axis_weights(a)).collect();
        let mut out = vec![T::one(); self.len()];
        let mut idx = vec![0usize; self.dims()];
        for (k, w) in out.iter_mut().enumerate() {
            self.multi_index(k, &mut idx);
            for a in 0..self.dims() {
                *w = *w * per_axis[a][idx[a]];
            }
        }
        out
    }

    /// Whether every axis is the same and symmetric about the origin.
    pub fn is_symmetric_cube(&self) -> bool {
        let tol = T::tol(1e-12) * (T::one() + self.upper[0].abs());
        (0..self.dims()).all(|a| {
            self.points[a] == self.points[0]
                && (self.lower[a] - self.lower[0]).abs() <= tol
                && (self.upper[a] - self.upper[0]).abs() <= tol
                && (self.lower[a] + self.upper[a]).abs() <= tol
        })
    }

    /// Errors unless both grids describe the same nodes.
    pub fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.points != other.points {
            return Err(Error::IncompatibleGrids(format!(
                "point counts {:?} vs {:?}",
                self.points, other.points
            )));
        }
        for a in 0..self.dims() {
            let scale = T::one() + self.upper[a].abs() + self.lower[a].abs();
            let tol = T::tol(1e-12) * scale;
            if (self.lower[a] - other.lower[a]).abs() > tol
                || (self.upper[a] - other.upper[a]).abs() > tol
            {
                return Err(Error::IncompatibleGrids(format!(
                    "axis {a}: [{}, {}] vs [{}, {}]",
                    self.lower[a], self.upper[a], other.lower[a], other.upper[a]
                )));
            }
        }
        Ok(())
    }

    /// Symmetric grid with the same spacing covering every pairwise difference
    /// of nodes of this 1D grid: `2M - 1` nodes on `[-(upper-lower), upper-lower]`.
    pub fn difference_grid(&self) -> Result<Self> {
        if self.dims() != 1 {
            return Err(Error::UnsupportedDimension(
                "difference grids are built from 1D grids".into(),
            ));
        }
        let width = self.upper[0] - self.lower[0];
        Self::line(-width, width, 2 * self.points[0] - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_reproducible_from_fields() {
        let g = UniformGrid::<f64>::line(-1.0, 1.0, 101).unwrap();
        assert_eq!(g.spacing(0), 2.0 / 100.0);
        assert_eq!(g.coordinate(0, 100), 1.0);
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(UniformGrid::<f64>::line(1.0, 1.0, 16).is_err());
        assert!(UniformGrid::<f64>::line(0.0, 1.0, 7).is_err());
        assert!(UniformGrid::<f64>::cube(5, 0.0, 1.0, 8).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = UniformGrid::<f64>::new(vec![0.0; 3], vec![1.0; 3], vec![8, 9, 10]).unwrap();
        let mut idx = [0usize; 3];
        for k in [0, 17, 300, g.len() - 1] {
            g.multi_index(k, &mut idx);
            assert_eq!(g.linear_index(&idx), k);
        }
        assert_eq!(g.strides(), vec![90, 10, 1]);
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let g = UniformGrid::<f64>::new(vec![0.0, -1.0], vec![2.0, 2.0], vec![11, 31]).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn difference_grid_shares_spacing() {
        let g = UniformGrid::<f64>::symmetric_line(8.0, 1025).unwrap();
        let d = g.difference_grid().unwrap();
        assert_eq!(d.points(0), 2049);
        assert!((d.spacing(0) - g.spacing(0)).abs() < 1e-15);
    }
}
