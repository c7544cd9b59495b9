use super::{integrate, UniformGrid};
use crate::error::{Error, Result};
use crate::real::Real;

/// Real function sampled at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: UniformGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: UniformGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: UniformGrid<T>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![T::zero(); n],
        }
    }

    pub fn constant(grid: UniformGrid<T>, value: T) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Samples `f` at the node coordinates.
    pub fn from_fn(grid: UniformGrid<T>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let dims = grid.dims();
        let mut idx = vec![0usize; dims];
        let mut x = vec![T::zero(); dims];
        let values = (0..grid.len())
            .map(|k| {
                grid.multi_index(k, &mut idx);
                for a in 0..dims {
                    x[a] = grid.coordinate(a, idx[a]);
                }
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn into_parts(self) -> (UniformGrid<T>, Vec<T>) {
        (self.grid, self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, index: &[usize]) -> T {
        self.values[self.grid.linear_index(index)]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination with a field on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m })
    }

    pub fn min(&self) -> T {
        self.values
            .iter()
            .fold(T::infinity(), |m, &v| if v < m { v } else { m })
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        Ok(self.zip_with(other, |a, b| a - b)?.max_abs())
    }
}

/// Nonnegative field with unit trapezoid mass.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField<T>(ScalarField<T>);

impl<T: Real> DensityField<T> {
    /// Checks nonnegativity and rescales to unit mass.
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        if let Some(v) = field.values().iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidDensity(format!(
                "value {v} is negative or not finite"
            )));
        }
        let mass = integrate(&field, None)?;
        if !(mass > T::zero()) {
            return Err(Error::InvalidDensity("zero total mass".into()));
        }
        let inv = T::one() / mass;
        Ok(Self(field.map(|v| v * inv)))
    }

    /// Density `phi^2 / ∫phi^2` of an amplitude.
    pub fn from_amplitude(phi: &ScalarField<T>) -> Result<Self> {
        Self::new(phi.map(|v| v * v))
    }

    #[inline]
    pub fn grid(&self) -> &UniformGrid<T> {
        self.0.grid()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        self.0.values()
    }

    #[inline]
    pub fn as_field(&self) -> &ScalarField<T> {
        &self.0
    }

    pub fn into_field(self) -> ScalarField<T> {
        self.0
    }

    /// Amplitude `sqrt(rho)`.
    pub fn amplitude(&self) -> ScalarField<T> {
        self.0.map(|v| v.sqrt())
    }

    /// Mixture `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: T) -> Result<Self> {
        let f = self.0.zip_with(&other.0, |a, b| (T::one() - t) * a + t * b)?;
        Self::new(f)
    }
}

impl<T> AsRef<ScalarField<T>> for DensityField<T> {
    fn as_ref(&self) -> &ScalarField<T> {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_normalizes_and_rejects_negatives() {
        let g = UniformGrid::<f64>::line(0.0, 2.0, 21).unwrap();
        let d = DensityField::new(ScalarField::constant(g.clone(), 3.0)).unwrap();
        assert!((integrate(d.as_field(), None).unwrap() - 1.0).abs() < 1e-12);
        let mut bad = ScalarField::constant(g, 1.0);
        bad.values_mut()[3] = -1e-3;
        assert!(DensityField::new(bad).is_err());
    }

    #[test]
    fn value_count_must_match() {
        let g = UniformGrid::<f64>::line(0.0, 1.0, 10).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 9]).is_err());
    }
}
