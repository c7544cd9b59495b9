//! Affine mean-field potentials `𝒱(x, μ) = V0(x) + ∫v0 dμ + g ∫v1(x - y) dμ(y)`
//! and the pairwise N-particle potential built from them.

mod profiles;
mod validate;

pub use profiles::{scaled_kernel, Kernel, TrapPolynomial};
pub use validate::{
    bochner_check, kernel_spectrum, qv_check, BochnerReport, HypothesisReport, QvReport,
};

use crate::error::{Error, Result};
use crate::grid::{convolve, integrate, DensityField, ScalarField, UniformGrid, MAX_DIMS};
use crate::real::Real;

/// How the interaction term acts on a density.
#[derive(Clone, Debug, PartialEq)]
pub enum Interaction<T> {
    /// Even kernel sampled on the difference grid of the particle grid.
    Kernel(ScalarField<T>),
    /// Contact interaction: `v1 * μ` replaced by `μ` itself.
    Local,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldPotential<T> {
    trap: ScalarField<T>,
    v0: ScalarField<T>,
    interaction: Interaction<T>,
    g: T,
}

impl<T: Real> MeanFieldPotential<T> {
    /// `trap` and `v0` live on the same 1D grid; `v1` on its difference grid.
    pub fn new(trap: ScalarField<T>, v0: ScalarField<T>, v1: ScalarField<T>, g: T) -> Result<Self> {
        let p = Self::with_interaction(trap, v0, Interaction::Local, g)?;
        p.trap.grid().difference_grid()?.ensure_same(v1.grid())?;
        let vals = v1.values();
        let n = vals.len();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("v1 must be finite".into()));
        }
        let tol = T::tol(1e-12) * v1.max_abs().max(T::one());
        if (0..n / 2).any(|j| (vals[j] - vals[n - 1 - j]).abs() > tol) {
            return Err(Error::InvalidParameter("v1 must be even: v1(x) = v1(-x)".into()));
        }
        Ok(Self {
            interaction: Interaction::Kernel(v1),
            ..p
        })
    }

    /// Potential whose interaction is the contact limit `2gρ`.
    pub fn local(trap: ScalarField<T>, v0: ScalarField<T>, g: T) -> Result<Self> {
        Self::with_interaction(trap, v0, Interaction::Local, g)
    }

    fn with_interaction(
        trap: ScalarField<T>,
        v0: ScalarField<T>,
        interaction: Interaction<T>,
        g: T,
    ) -> Result<Self> {
        let grid = trap.grid();
        if grid.dims() != 1 {
            return Err(Error::UnsupportedDimension(
                "mean-field potentials act on one-dimensional particles".into(),
            ));
        }
        grid.ensure_same(v0.grid())?;
        if !(g >= T::zero()) || !g.is_finite() {
            return Err(Error::InvalidParameter(format!("coupling g = {g} must be >= 0")));
        }
        if trap.values().iter().chain(v0.values()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("V0 and v0 must be finite".into()));
        }
        let n = grid.points(0);
        let top = trap.max();
        let edge = trap.values()[0].max(trap.values()[n - 1]);
        if edge < top - T::tol(1e-12) * top.abs().max(T::one()) {
            return Err(Error::InvalidParameter(
                "V0 must attain its maximum on the grid boundary (confining)".into(),
            ));
        }
        Ok(Self {
            trap,
            v0,
            interaction,
            g,
        })
    }

    /// Samples the named families on `grid`.
    pub fn from_profiles(
        grid: &UniformGrid<T>,
        trap: &TrapPolynomial,
        v0: &Kernel,
        v1: &Kernel,
        g: T,
    ) -> Result<Self> {
        let diff = grid.difference_grid()?;
        Self::new(trap.sample(grid), v0.sample(grid)?, v1.sample(&diff)?, g)
    }

    /// `V0 = x²` with no interaction.
    pub fn harmonic(grid: &UniformGrid<T>) -> Result<Self> {
        Self::from_profiles(grid, &TrapPolynomial::HARMONIC, &Kernel::Zero, &Kernel::Zero, T::zero())
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        self.trap.grid()
    }

    pub fn trap(&self) -> &ScalarField<T> {
        &self.trap
    }

    pub fn v0(&self) -> &ScalarField<T> {
        &self.v0
    }

    pub fn interaction(&self) -> &Interaction<T> {
        &self.interaction
    }

    /// The sampled kernel, or `None` for a contact interaction.
    pub fn v1(&self) -> Option<&ScalarField<T>> {
        match &self.interaction {
            Interaction::Kernel(k) => Some(k),
            Interaction::Local => None,
        }
    }

    pub fn coupling(&self) -> T {
        self.g
    }

    /// Same potential with coupling `g`.
    pub fn with_coupling(&self, g: T) -> Result<Self> {
        Self::with_interaction(self.trap.clone(), self.v0.clone(), self.interaction.clone(), g)
    }

    fn check_density(&self, mu: &DensityField<T>) -> Result<()> {
        self.grid().ensure_same(mu.grid())
    }

    /// `v1 * μ` (or `μ` for a contact interaction).
    pub fn smoothed(&self, mu: &DensityField<T>) -> Result<ScalarField<T>> {
        self.check_density(mu)?;
        match &self.interaction {
            Interaction::Kernel(k) => convolve(mu.as_field(), k),
            Interaction::Local => Ok(mu.as_field().clone()),
        }
    }

    /// `∫v0 dμ`.
    pub fn v0_mean(&self, mu: &DensityField<T>) -> Result<T> {
        self.check_density(mu)?;
        integrate(&self.v0, Some(mu.as_field()))
    }

    /// `𝒱(·, μ) = V0 + ∫v0 dμ + g (v1 * μ)`.
    pub fn evaluate(&self, mu: &DensityField<T>) -> Result<ScalarField<T>> {
        let shift = self.v0_mean(mu)?;
        let g = self.g;
        self.trap
            .zip_with(&self.smoothed(mu)?, |v, s| v + shift + g * s)
    }

    /// `𝒱(·, μ) + v0 + g (v1 * μ)`: the potential multiplying `φ` in the
    /// self-consistent ground-state equation.
    pub fn effective_field(&self, mu: &DensityField<T>) -> Result<ScalarField<T>> {
        let shift = self.v0_mean(mu)?;
        let two_g = self.g + self.g;
        let s = self.smoothed(mu)?;
        let base = self.trap.zip_with(&self.v0, |v, w| v + w + shift)?;
        base.zip_with(&s, |b, s| b + two_g * s)
    }

    /// `∫∫ (v0(y) + g v1(x - y)) μ(dx) μ(dy)`, the pairing of the measure
    /// derivative with `μ ⊗ μ`.
    pub fn derivative_pairing(&self, mu: &DensityField<T>) -> Result<T> {
        let s = self.smoothed(mu)?;
        Ok(self.v0_mean(mu)? + self.g * integrate(&s, Some(mu.as_field()))?)
    }

    /// `Σ_i V0(x_i) + Σ_i v0(x_i) + (2g/(N-1)) Σ_{i<k} v1(x_i - x_k)`, the
    /// potential `Σ_i 𝒱(x_i, (N-1)^{-1} Σ_{k≠i} δ_{x_k})` with kernel values
    /// taken pairwise from the sampled `v1`.
    pub fn assemble_vn(&self, n: usize, grid_n: &UniformGrid<T>) -> Result<ScalarField<T>> {
        if !(2..=MAX_DIMS).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "particle count {n} outside 2..={MAX_DIMS}"
            )));
        }
        if grid_n.dims() != n {
            return Err(Error::IncompatibleGrids(format!(
                "{}-axis grid for {n} particles",
                grid_n.dims()
            )));
        }
        for a in 0..n {
            grid_n.axis_grid(a)?.ensure_same(self.grid())?;
        }
        let Interaction::Kernel(v1) = &self.interaction else {
            return Err(Error::InvalidParameter(
                "the N-particle potential needs a sampled interaction kernel".into(),
            ));
        };
        let m = self.grid().points(0);
        let single: Vec<T> = self
            .trap
            .values()
            .iter()
            .zip(self.v0.values())
            .map(|(&a, &b)| a + b)
            .collect();
        let pair = v1.values();
        let scale = (self.g + self.g) / T::from_usize_lossy(n - 1);
        let mut idx = [0usize; MAX_DIMS];
        let values = (0..grid_n.len())
            .map(|k| {
                grid_n.multi_index(k, &mut idx[..n]);
                let mut one = T::zero();
                let mut two = T::zero();
                for i in 0..n {
                    one = one + single[idx[i]];
                    for j in i + 1..n {
                        two = two + pair[idx[i] + m - 1 - idx[j]];
                    }
                }
                one + scale * two
            })
            .collect();
        ScalarField::new(grid_n.clone(), values)
    }

    /// Bochner certificate of `v1` (a contact interaction has a flat spectrum)
    /// and growth certificate of `V0` on the nonnegative half-line.
    pub fn validate(&self) -> Result<(BochnerReport, QvReport)> {
        let bochner = match &self.interaction {
            Interaction::Kernel(k) => bochner_check(k)?,
            Interaction::Local => BochnerReport {
                pass: true,
                min_spectrum: 1.0,
                max_spectrum: 1.0,
            },
        };
        let grid = self.grid();
        let (r, v): (Vec<f64>, Vec<f64>) = (0..grid.points(0))
            .map(|i| (grid.coordinate(0, i).to_f64_lossy(), self.trap.values()[i].to_f64_lossy()))
            .filter(|(x, _)| *x >= -1e-12)
            .map(|(x, v)| (x.max(0.0), v))
            .unzip();
        let qv = qv_check(&r, &v).unwrap_or_else(|e| QvReport {
            pass: false,
            epsilon: 0.0,
            e1: 0.0,
            e2: 0.0,
            e3: f64::INFINITY,
            note: Some(e.to_string()),
        });
        Ok((bochner, qv))
    }
}
