//! Intermediate scaling: N-particle problems with the narrowing kernel
//! `v_N(x) = N^β v(N^β x)`, `0 < β < 1`, compared against the mean-field
//! problem with the contact interaction `g ρ` at `g = ∫v`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{integrate, DensityField, ScalarField, UniformGrid};
use crate::meanfield::{solve_ground_state, MeanFieldGroundState, MeanFieldSettings};
use crate::nparticle::{solve_linear_ground_state, NParticleSettings};
use crate::potentials::{Kernel, MeanFieldPotential, TrapPolynomial};

/// Minimal number of nodes across the scaled kernel's width.
pub const NODES_ACROSS_KERNEL: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingScenario {
    pub betas: Vec<f64>,
    pub n_list: Vec<usize>,
    pub kernel: Kernel,
    pub trap: TrapPolynomial,
}

impl ScalingScenario {
    pub fn new(betas: Vec<f64>, n_list: Vec<usize>, kernel: Kernel, trap: TrapPolynomial) -> Result<Self> {
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "beta = {b} violates 0 < beta < 1"
            )));
        }
        if let Some(n) = n_list.iter().find(|&&n| !(2..=4).contains(&n)) {
            return Err(Error::InvalidParameter(format!("particle count {n} outside 2..=4")));
        }
        if kernel_width(&kernel).is_none() {
            return Err(Error::InvalidParameter(format!("kernel {kernel} has no finite mass")));
        }
        Ok(Self {
            betas,
            n_list,
            kernel,
            trap,
        })
    }

    /// Contact coupling of the limit problem.
    pub fn g_target(&self) -> Result<f64> {
        kernel_mass(&self.kernel)
    }
}

/// Full width used by the resolution rule: the support diameter, or `2σ`
/// for a Gaussian.
pub fn kernel_width(kernel: &Kernel) -> Option<f64> {
    match kernel {
        Kernel::Gaussian { sigma } => Some(2.0 * sigma),
        Kernel::Cosine { .. } | Kernel::Zero => None,
        k => k.support_radius().map(|r| 2.0 * r),
    }
}

/// `∫v` by composite Simpson on the support (`±12σ` for a Gaussian).
pub fn kernel_mass(kernel: &Kernel) -> Result<f64> {
    let r = match kernel {
        Kernel::Gaussian { sigma } => 12.0 * sigma,
        Kernel::Cosine { .. } => {
            return Err(Error::InvalidParameter("cosine kernels have no finite mass".into()))
        }
        k => k.support_radius().unwrap_or(0.0),
    };
    if r == 0.0 {
        return Ok(0.0);
    }
    let n = 20_000;
    let h = 2.0 * r / n as f64;
    let mut s = kernel.eval(-r) + kernel.eval(r);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * kernel.eval(-r + i as f64 * h);
    }
    Ok(s * h / 3.0)
}

/// Samples `kernel` on the difference grid of `axis` and rescales the
/// samples so that their quadrature mass is `mass` exactly.
pub fn sample_with_mass(kernel: &Kernel, axis: &UniformGrid<f64>, mass: f64) -> Result<ScalarField<f64>> {
    let field = kernel.sample(&axis.difference_grid()?)?;
    let discrete = integrate(&field, None)?;
    if !(discrete > 0.0) {
        return Err(Error::InvalidParameter("kernel has no positive mass on the grid".into()));
    }
    Ok(field.map(|v| v * mass / discrete))
}

/// Mean-field ground state with the contact term `g ρ` in place of `v1 * ρ`.
pub fn solve_local_meanfield(
    trap: &TrapPolynomial,
    g: f64,
    axis: &UniformGrid<f64>,
    settings: &MeanFieldSettings,
) -> Result<MeanFieldGroundState<f64>> {
    let potential = MeanFieldPotential::local(trap.sample(axis), ScalarField::zeros(axis.clone()), g)?;
    solve_ground_state(&potential, settings)
}

/// Smallest odd per-axis count that puts `NODES_ACROSS_KERNEL` nodes across
/// a kernel of width `width` on the box of `axis`.
fn points_for_width(axis: &UniformGrid<f64>, width: f64) -> usize {
    let span = axis.upper(0) - axis.lower(0);
    let m = (NODES_ACROSS_KERNEL * span / width).ceil() as usize + 1;
    m + (m + 1) % 2
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingCell {
    pub beta: f64,
    pub n: usize,
    pub energy: f64,
    /// `E_δ(ρ_δ) - E_N`.
    pub energy_gap: f64,
    /// `∫|ρ_N^{(1)} - ρ_δ|`.
    pub marginal_l1_gap: f64,
    /// Mass of the rescaled kernel function.
    pub kernel_mass: f64,
    pub kernel_width: f64,
    pub residual_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTrend {
    pub beta: f64,
    pub energy_gap_decreasing: bool,
    pub l1_gap_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub g_target: f64,
    pub local_energy: f64,
    pub local_mu: f64,
    pub points_per_axis: usize,
    pub cells: Vec<ScalingCell>,
    pub trends: Vec<ScalingTrend>,
}

#[derive(Clone, Debug, Default)]
pub struct ScalingSettings {
    pub meanfield: MeanFieldSettings,
    pub nparticle: NParticleSettings,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Solves every `(β, N)` cell on the powers of `axis` and compares it with
/// the contact-interaction reference on `axis`.
pub fn scaling_sweep(
    scenario: &ScalingScenario,
    axis: &UniformGrid<f64>,
    settings: &ScalingSettings,
) -> Result<ScalingReport> {
    let g = scenario.g_target()?;
    let base_width = kernel_width(&scenario.kernel).unwrap_or(0.0);
    let h = axis.spacing(0);
    for &beta in &scenario.betas {
        for &n in &scenario.n_list {
            let w = base_width * (n as f64).powf(-beta);
            if w < NODES_ACROSS_KERNEL * h {
                return Err(Error::Resolution {
                    message: format!(
                        "kernel width {w:.4} at beta = {beta}, N = {n} spans fewer than {NODES_ACROSS_KERNEL} nodes (h = {h:.4})"
                    ),
                    suggested: points_for_width(axis, w),
                });
            }
        }
    }
    let local = solve_local_meanfield(&scenario.trap, g, axis, &settings.meanfield)?;
    let trap = scenario.trap.sample(axis);
    let zeros = ScalarField::zeros(axis.clone());
    let mut cells = Vec::new();
    let mut trends = Vec::new();
    for &beta in &scenario.betas {
        let mut row = Vec::new();
        for &n in &scenario.n_list {
            let kernel = scenario.kernel.scaled(beta, n)?;
            let mass = kernel_mass(&kernel)?;
            let v1 = sample_with_mass(&kernel, axis, g)?;
            let potential = MeanFieldPotential::new(trap.clone(), zeros.clone(), v1, 1.0)?;
            let state = solve_linear_ground_state(&potential, n, &settings.nparticle)?;
            let l1 = marginal_gap(&state.marginal1, &local.rho0)?;
            row.push(ScalingCell {
                beta,
                n,
                energy: state.energy,
                energy_gap: local.energy - state.energy,
                marginal_l1_gap: l1,
                kernel_mass: mass,
                kernel_width: kernel_width(&kernel).unwrap_or(0.0),
                residual_norm: state.residual_norm,
            });
        }
        row.sort_by_key(|c| c.n);
        let gaps: Vec<f64> = row.iter().map(|c| c.energy_gap).collect();
        let l1s: Vec<f64> = row.iter().map(|c| c.marginal_l1_gap).collect();
        trends.push(ScalingTrend {
            beta,
            energy_gap_decreasing: strictly_decreasing(&gaps),
            l1_gap_decreasing: strictly_decreasing(&l1s),
        });
        cells.extend(row);
    }
    Ok(ScalingReport {
        g_target: g,
        local_energy: local.energy,
        local_mu: local.mu0,
        points_per_axis: axis.points(0),
        cells,
        trends,
    })
}

fn marginal_gap(a: &DensityField<f64>, b: &DensityField<f64>) -> Result<f64> {
    integrate(&a.as_field().zip_with(b.as_field(), |x, y| (x - y).abs())?, None)
}
