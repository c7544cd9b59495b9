//! The numerical core instantiated at `f32`.

use std::f32::consts::SQRT_2;

use mvlab::diagnostics::{entropy, fisher_information, tv_distance};
use mvlab::meanfield::{solve_ground_state, MeanFieldSettings};
use mvlab::nparticle::{solve_linear_ground_state, NParticleSettings};
use mvlab::potentials::{Kernel, MeanFieldPotential, TrapPolynomial};
use mvlab::{Density32, Field32, Grid32};

fn settings() -> MeanFieldSettings {
    let mut s = MeanFieldSettings {
        tol: 1e-5,
        ..Default::default()
    };
    s.eigen.tol = 1e-5;
    s
}

#[test]
fn harmonic_ground_state_in_f32() {
    let grid = Grid32::symmetric_line(8.0, 513).unwrap();
    let potential = MeanFieldPotential::harmonic(&grid).unwrap();
    let s = solve_ground_state(&potential, &settings()).unwrap();
    assert!((s.value() - SQRT_2).abs() < 1e-3, "{}", s.value());
    assert!((s.mu0 - 2.0 * SQRT_2).abs() < 1e-3, "{}", s.mu0);
    let i = fisher_information(&s.rho0, false).unwrap();
    assert!((i - SQRT_2).abs() < 1e-2, "{i}");
    assert!(entropy(&s.rho0).is_finite());
}

#[test]
fn interacting_two_particle_state_in_f32() {
    let axis = Grid32::symmetric_line(7.0, 65).unwrap();
    let potential =
        MeanFieldPotential::from_profiles(&axis, &TrapPolynomial::HARMONIC, &Kernel::Zero, &Kernel::Gaussian { sigma: 1.0 }, 0.5)
            .unwrap();
    let mf = solve_ground_state(&potential, &settings()).unwrap();
    let mut np = NParticleSettings::default();
    np.eigen.tol = 1e-5;
    let st = solve_linear_ground_state(&potential, 2, &np).unwrap();
    assert!(st.energy <= mf.energy + 1e-4, "{} vs {}", st.energy, mf.energy);
    assert!(tv_distance(&st.marginal1, &mf.rho0).unwrap() < 0.05);
}

#[test]
fn fields_round_trip_through_f32_aliases() {
    let grid = Grid32::symmetric_line(4.0, 65).unwrap();
    let f = Field32::from_fn(grid, |x| (-x[0] * x[0]).exp());
    let rho = Density32::new(f).unwrap();
    let mass: f32 = rho.values().iter().zip(rho.grid().weights()).map(|(v, w)| v * w).sum();
    assert!((mass - 1.0).abs() < 1e-5);
}
