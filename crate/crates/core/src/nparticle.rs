//! Symmetric ground state of the linear N-particle problem
//! `-4Δφ + 2V_N φ = μ_N φ` on the N-fold power of a 1D grid.
//!
//! Energies are per particle: `E_N = (1/N)[2∫|∇φ|² + ∫V_N φ²]`, so the
//! multiplier is `μ_N = 2N E_N`.

use crate::eigen::{lowest_eigenpair, EigenSettings, Preconditioner, SchrodingerOperator};
use crate::error::{Error, Result};
use crate::grid::{integrate, marginalize, symmetrize, DensityField, ScalarField, MAX_DIMS};
use crate::meanfield::{equation_residual, kinetic_energy, optimal_drift, rayleigh, EnergySplit, KINETIC};
use crate::potentials::MeanFieldPotential;
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct NParticleSettings {
    pub eigen: EigenSettings,
    /// Upper bound on the number of grid nodes.
    pub max_nodes: usize,
}

impl Default for NParticleSettings {
    fn default() -> Self {
        Self {
            eigen: EigenSettings {
                tol: 1e-9,
                ..EigenSettings::default()
            },
            max_nodes: 2_100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NParticleGroundState<T> {
    pub n: usize,
    /// Symmetric, nonnegative, `∫φ² = 1`.
    pub phi_n: ScalarField<T>,
    pub rho_n: DensityField<T>,
    /// Rayleigh quotient of `-4Δ + 2V_N`.
    pub mu_n: T,
    pub energy: T,
    pub kinetic: T,
    pub potential_energy: T,
    pub marginal1: DensityField<T>,
    pub residual_norm: T,
    pub iterations: usize,
}

impl<T: Real> NParticleGroundState<T> {
    /// Value of the N-particle ergodic problem, equal to `E_N`.
    pub fn value(&self) -> T {
        self.energy
    }

    /// `2 E_N`: the multiplier if the equation is read with per-particle
    /// energies on both sides.
    pub fn mu_per_particle_form(&self) -> T {
        T::lit(2.0) * self.energy
    }
}

/// Largest odd per-axis count whose `n`-th power fits in `max_nodes`.
pub fn max_points_per_axis(n: usize, max_nodes: usize) -> usize {
    let mut m = (max_nodes as f64).powf(1.0 / n as f64).floor() as usize + 1;
    while m.pow(n as u32) > max_nodes || m.is_multiple_of(2) {
        m -= 1;
    }
    m
}

/// `φ(x_1) ⋯ φ(x_n)` on the `n`-fold power grid.
pub fn tensor_power<T: Real>(phi: &ScalarField<T>, n: usize) -> Result<ScalarField<T>> {
    let grid = phi.grid();
    if grid.dims() != 1 {
        return Err(Error::UnsupportedDimension("tensor powers of 1D fields only".into()));
    }
    let big = grid.power(n)?;
    let v = phi.values();
    let mut idx = [0usize; MAX_DIMS];
    let values = (0..big.len())
        .map(|k| {
            big.multi_index(k, &mut idx[..n]);
            idx[..n].iter().fold(T::one(), |acc, &i| acc * v[i])
        })
        .collect();
    ScalarField::new(big, values)
}

fn energy_with_vn<T: Real>(phi: &ScalarField<T>, vn: &ScalarField<T>, n: usize) -> Result<EnergySplit<T>> {
    let mass = integrate(&phi.map(|v| v * v), None)?;
    if (mass - T::one()).abs() > T::tol(1e-8) {
        return Err(Error::Normalization {
            mass: mass.to_f64_lossy(),
        });
    }
    let nn = T::from_usize_lossy(n);
    let kinetic = kinetic_energy(phi)? / nn;
    let rho = phi.map(|v| v * v);
    let potential = integrate(vn, Some(&rho))? / nn;
    Ok(EnergySplit {
        total: kinetic + potential,
        kinetic,
        potential,
    })
}

/// Per-particle energy split of a normalized N-particle amplitude.
pub fn energy_n<T: Real>(phi: &ScalarField<T>, potential: &MeanFieldPotential<T>, n: usize) -> Result<EnergySplit<T>> {
    let vn = potential.assemble_vn(n, phi.grid())?;
    energy_with_vn(phi, &vn, n)
}

/// Solves on the `n`-fold power of the potential's grid.
pub fn solve_linear_ground_state<T: Real>(
    potential: &MeanFieldPotential<T>,
    n: usize,
    settings: &NParticleSettings,
) -> Result<NParticleGroundState<T>> {
    if !(2..=MAX_DIMS).contains(&n) {
        return Err(Error::InvalidParameter(format!("particle count {n} outside 2..={MAX_DIMS}")));
    }
    let line = potential.grid();
    let m = line.len();
    if m.checked_pow(n as u32).is_none_or(|len| len > settings.max_nodes) {
        return Err(Error::Resolution {
            message: format!("{m}^{n} nodes exceed the budget of {}", settings.max_nodes),
            suggested: max_points_per_axis(n, settings.max_nodes),
        });
    }
    let grid = line.power(n)?;
    let vn = potential.assemble_vn(n, &grid)?;

    let two = T::lit(2.0);
    let kinetic = T::lit(KINETIC);
    let single: Vec<T> = potential
        .trap()
        .values()
        .iter()
        .zip(potential.v0().values())
        .map(|(&a, &b)| two * (a + b))
        .collect();
    let op = SchrodingerOperator::new(grid.clone(), kinetic, vn.values().iter().map(|&v| two * v).collect())?;
    let pre = Preconditioner::separable(line, kinetic, &single, n)?;

    // start from the product of the one-body ground state
    let line_op = SchrodingerOperator::new(line.clone(), kinetic, single.clone())?;
    let umin = single.iter().fold(T::infinity(), |a, &b| a.min(b));
    let line_pre = Preconditioner::tridiagonal(&line_op, umin - T::one())?;
    let guess: Vec<T> = line
        .axis_nodes(0)
        .iter()
        .map(|&x| (-(x * x) / two).exp())
        .collect();
    let one_body = lowest_eigenpair(&line_op, &line_pre, &guess, &settings.eigen, None)?;
    let init = tensor_power(&ScalarField::new(line.clone(), one_body.vector)?, n)?.into_values();

    let sym_grid = grid.clone();
    let project = move |x: &[T]| -> Vec<T> {
        let f = ScalarField::new(sym_grid.clone(), x.to_vec()).expect("length checked by the solver");
        symmetrize(&f).expect("cubic grid").into_values()
    };
    let pair = lowest_eigenpair(&op, &pre, &init, &settings.eigen, Some(&project))?;

    let raw = ScalarField::new(grid, pair.vector)?;
    let phi = symmetrize(&raw)?;
    let norm = integrate(&phi.map(|v| v * v), None)?.sqrt();
    let phi_n = phi.map(|v| v.max(T::zero()) / norm);
    let split = energy_with_vn(&phi_n, &vn, n)?;
    let mu_n = rayleigh(&phi_n, &vn)?;
    let residual_norm = equation_residual(&phi_n, &vn, mu_n)?;
    let rho_n = DensityField::from_amplitude(&phi_n)?;
    let marginal1 = marginalize(&rho_n, &[0])?;
    Ok(NParticleGroundState {
        n,
        phi_n,
        rho_n,
        mu_n,
        energy: split.total,
        kinetic: split.kinetic,
        potential_energy: split.potential,
        marginal1,
        residual_norm,
        iterations: pair.iterations,
    })
}

/// `k`-particle marginal on the first `k` axes.
pub fn marginal_k<T: Real>(state: &NParticleGroundState<T>, k: usize) -> Result<DensityField<T>> {
    if k == 0 || k >= state.n {
        return Err(Error::InvalidParameter(format!(
            "marginal order {k} outside 1..{}",
            state.n
        )));
    }
    let axes: Vec<usize> = (0..k).collect();
    marginalize(&state.rho_n, &axes)
}

/// `∇_i ρ_N / ρ_N` for every particle `i`.
pub fn optimal_drift_n<T: Real>(state: &NParticleGroundState<T>) -> Result<Vec<ScalarField<T>>> {
    optimal_drift(&state.rho_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid;
    use crate::meanfield::{energy, solve_ground_state, MeanFieldSettings};
    use crate::potentials::{Kernel, TrapPolynomial};
    use std::f64::consts::SQRT_2;

    fn harmonic(extent: f64, m: usize) -> MeanFieldPotential<f64> {
        MeanFieldPotential::harmonic(&UniformGrid::symmetric_line(extent, m).unwrap()).unwrap()
    }

    fn interacting(extent: f64, m: usize) -> MeanFieldPotential<f64> {
        MeanFieldPotential::from_profiles(
            &UniformGrid::symmetric_line(extent, m).unwrap(),
            &TrapPolynomial::HARMONIC,
            &Kernel::Zero,
            &Kernel::Gaussian { sigma: 1.0 },
            0.5,
        )
        .unwrap()
    }

    fn l2_distance(a: &ScalarField<f64>, b: &ScalarField<f64>) -> f64 {
        integrate(&a.zip_with(b, |x, y| (x - y).powi(2)).unwrap(), None).unwrap().sqrt()
    }

    #[test]
    fn free_pair_is_a_product() {
        let p = harmonic(8.0, 257);
        let s = solve_linear_ground_state(&p, 2, &NParticleSettings::default()).unwrap();
        let mf = solve_ground_state(&p, &MeanFieldSettings::default()).unwrap();
        let product = tensor_power(&mf.phi0, 2).unwrap();
        assert!(l2_distance(&s.phi_n, &product) < 1e-3);
        assert!((s.mu_n - 4.0 * SQRT_2).abs() < 5e-3);
        assert!((s.mu_n - 2.0 * mf.mu0).abs() < 1e-6);
        assert!((s.energy - SQRT_2).abs() < 1e-3);
        assert!((s.mu_per_particle_form() - 2.0 * s.energy).abs() < 1e-15);
        assert!((s.energy - s.kinetic - s.potential_energy).abs() < 1e-12);
        assert!(s.residual_norm < 1e-5);
        assert!(s.phi_n.min() >= 0.0);
    }

    #[test]
    fn free_triple_multiplier() {
        let p = harmonic(7.0, 61);
        let s = solve_linear_ground_state(&p, 3, &NParticleSettings::default()).unwrap();
        let mf = solve_ground_state(&p, &MeanFieldSettings::default()).unwrap();
        assert!((s.mu_n - 3.0 * mf.mu0).abs() < 1e-6);
        assert!(s.residual_norm < 1e-5);
    }

    #[test]
    fn symmetric_and_normalized() {
        let p = interacting(6.0, 41);
        let s = solve_linear_ground_state(&p, 3, &NParticleSettings::default()).unwrap();
        let g = s.phi_n.grid().clone();
        let mass = integrate(&s.phi_n.map(|v| v * v), None).unwrap();
        assert!((mass - 1.0).abs() < 1e-10);
        let mut idx = [0usize; 3];
        for k in 0..g.len() {
            g.multi_index(k, &mut idx);
            let v = s.phi_n.values()[k];
            for perm in [[1, 0, 2], [0, 2, 1], [2, 1, 0]] {
                let swapped = [idx[perm[0]], idx[perm[1]], idx[perm[2]]];
                assert!((v - s.phi_n.at(&swapped)).abs() < 1e-10);
            }
        }
        assert!(s.residual_norm < 1e-5);
    }

    #[test]
    fn correlated_energy_below_mean_field() {
        let p = interacting(8.0, 129);
        let s = solve_linear_ground_state(&p, 2, &NParticleSettings::default()).unwrap();
        let mf = solve_ground_state(&p, &MeanFieldSettings::default()).unwrap();
        assert!(s.energy <= mf.energy + 1e-8, "{} {}", s.energy, mf.energy);
        assert!(mf.energy - s.energy > 1e-4);
    }

    #[test]
    fn product_energy_equals_mean_field_energy() {
        let p = interacting(8.0, 129);
        let mf = solve_ground_state(&p, &MeanFieldSettings::default()).unwrap();
        let e1 = energy(&mf.phi0, &p).unwrap();
        for n in [2, 3] {
            let e = energy_n(&tensor_power(&mf.phi0, n).unwrap(), &p, n).unwrap();
            assert!((e.total - e1.total).abs() < 1e-8, "{n}: {} {}", e.total, e1.total);
        }
        let free = harmonic(8.0, 129);
        let mf0 = solve_ground_state(&free, &MeanFieldSettings::default()).unwrap();
        let e = energy_n(&tensor_power(&mf0.phi0, 2).unwrap(), &free, 2).unwrap();
        let trap_mean = integrate(free.trap(), Some(mf0.rho0.as_field())).unwrap();
        assert!((e.potential - trap_mean).abs() < 1e-12);
    }

    #[test]
    fn relabeled_field_has_same_energy() {
        let p = interacting(6.0, 33);
        let g = p.grid().power(2).unwrap();
        let raw = ScalarField::from_fn(g.clone(), |x| (-(x[0] - 0.5).powi(2) - 2.0 * (x[1] + 0.3).powi(2)).exp());
        let swapped = ScalarField::from_fn(g, |x| (-(x[1] - 0.5).powi(2) - 2.0 * (x[0] + 0.3).powi(2)).exp());
        let norm = |f: &ScalarField<f64>| {
            let n = integrate(&f.map(|v| v * v), None).unwrap().sqrt();
            f.map(|v| v / n)
        };
        let a = energy_n(&norm(&raw), &p, 2).unwrap();
        let b = energy_n(&norm(&swapped), &p, 2).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
    }

    #[test]
    fn marginals_and_drift_symmetry() {
        let p = interacting(6.0, 49);
        let s = solve_linear_ground_state(&p, 2, &NParticleSettings::default()).unwrap();
        let m1 = marginal_k(&s, 1).unwrap();
        let other = marginalize(&s.rho_n, &[1]).unwrap();
        assert!(m1.as_field().sup_distance(other.as_field()).unwrap() < 1e-10);
        assert!((integrate(m1.as_field(), None).unwrap() - 1.0).abs() < 1e-10);
        assert!(marginal_k(&s, 2).is_err() && marginal_k(&s, 0).is_err());

        let d = optimal_drift_n(&s).unwrap();
        let (a, b) = (7, 30);
        assert!((d[0].at(&[a, b]) - d[1].at(&[b, a])).abs() < 1e-8);
        assert!(d[0].at(&[24, 24]).abs() < 1e-8);
    }

    #[test]
    fn product_marginal_and_drift() {
        let p = harmonic(8.0, 129);
        let mf = solve_ground_state(&p, &MeanFieldSettings::default()).unwrap();
        let rho = DensityField::from_amplitude(&tensor_power(&mf.phi0, 3).unwrap()).unwrap();
        let m2 = marginalize(&rho, &[0, 1]).unwrap();
        let expect = tensor_power(mf.rho0.as_field(), 2).unwrap();
        assert!(m2.as_field().sup_distance(&expect).unwrap() < 1e-10);

        let g = UniformGrid::<f64>::symmetric_line(8.0, 257).unwrap();
        let gauss = ScalarField::from_fn(g.clone(), |x| (-x[0] * x[0] / (2.0 * SQRT_2)).exp());
        let rho2 = DensityField::from_amplitude(&tensor_power(&gauss, 2).unwrap()).unwrap();
        let d = optimal_drift(&rho2).unwrap();
        let big = rho2.grid().clone();
        let mut idx = [0usize; 2];
        for k in 0..big.len() {
            big.multi_index(k, &mut idx);
            let (x0, x1) = (big.coordinate(0, idx[0]), big.coordinate(1, idx[1]));
            if x0.abs() <= 4.0 && x1.abs() <= 4.0 {
                assert!((d[0].values()[k] + SQRT_2 * x0).abs() < 1e-3);
                assert!((d[1].values()[k] + SQRT_2 * x1).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn oversized_grids_are_rejected_with_a_suggestion() {
        let p = harmonic(6.0, 129);
        match solve_linear_ground_state(&p, 4, &NParticleSettings::default()) {
            Err(Error::Resolution { suggested, .. }) => {
                assert!(suggested % 2 == 1 && suggested.pow(4) <= 2_100_000);
                assert!((suggested + 2).pow(4) > 2_100_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn local_interaction_is_rejected() {
        let g = UniformGrid::<f64>::symmetric_line(6.0, 33).unwrap();
        let trap = TrapPolynomial::HARMONIC.sample(&g);
        let p = MeanFieldPotential::local(trap, ScalarField::zeros(g), 0.5).unwrap();
        assert!(solve_linear_ground_state(&p, 2, &NParticleSettings::default()).is_err());
    }
}
