//! Numerical laboratory for ergodic mean-field (McKean–Vlasov) optimal control
//! and its symmetric N-particle approximation.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: tensor grids, sampled fields and the quadrature/stencil kernels.
//! - [`potentials`]: affine mean-field potentials, the N-particle potential and
//!   hypothesis validators.
//! - [`eigen`]: matrix-free ground-state solver for `-4Δ + 2U`.
//! - [`meanfield`] and [`nparticle`]: the two ground-state problems.
//! - [`diagnostics`]: entropies, distances, Fisher information and the
//!   drift-discrepancy identity.
//! - [`sde`]: Euler–Maruyama simulation of the optimally controlled dynamics.
//! - [`scaling`]: narrowing-kernel experiments against the local limit.
//! - [`scenario`], [`report`] and [`runner`]: the scenario-driven pipeline used
//!   by the `mvlab` binary.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the pipeline uses.

pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod meanfield;
pub mod nparticle;
pub mod potentials;
pub mod real;
pub mod report;
pub mod runner;
pub mod scaling;
pub mod scenario;
pub mod sde;

pub use error::{Error, Result};
pub use real::Real;

pub type Grid = grid::UniformGrid<f64>;
pub type Field = grid::ScalarField<f64>;
pub type Density = grid::DensityField<f64>;
pub type Potential = potentials::MeanFieldPotential<f64>;
pub type MeanFieldState = meanfield::MeanFieldGroundState<f64>;
pub type NParticleState = nparticle::NParticleGroundState<f64>;

pub type Grid32 = grid::UniformGrid<f32>;
pub type Field32 = grid::ScalarField<f32>;
pub type Density32 = grid::DensityField<f32>;
