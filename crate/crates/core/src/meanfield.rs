//! Self-consistent ground state of the mean-field energy
//! `E(ρ) = ½∫|∇ρ|²/ρ + ∫𝒱(x, ρ) ρ dx`, written in amplitude form
//! `E = 2∫|∇φ|² + ∫𝒱(x, φ²) φ²` with `ρ = φ²`.
//!
//! Its minimizer solves `-4Δφ + 2 W(φ²) φ = μ φ` with `W` the potential's
//! effective field, and the optimal feedback is `α = ∇ρ/ρ`.

use serde::Serialize;

use crate::eigen::{lowest_eigenpair, EigenSettings, Preconditioner, SchrodingerOperator};
use crate::error::{Error, Result};
use crate::grid::{
    dirichlet_form, gradient, inner_product, integrate, laplacian, line_starts, DensityField,
    ScalarField, UniformGrid,
};
use crate::potentials::{bochner_check, MeanFieldPotential};
use crate::real::Real;

/// Coefficient of `-Δ` in the amplitude equation.
pub const KINETIC: f64 = 4.0;
/// Densities below this fraction of their maximum get no drift of their own.
pub const DRIFT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergySplit<T> {
    pub total: T,
    pub kinetic: T,
    pub potential: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialGuess {
    /// Gaussian matched to the curvature of `V0` at the origin.
    Gaussian,
    Uniform,
}

#[derive(Clone, Debug)]
pub struct MeanFieldSettings {
    /// Stop when the density changes by less than this in sup norm.
    pub tol: f64,
    pub max_outer: usize,
    /// Weight of the new density in `ρ ← (1 - m) ρ + m ρ_new`.
    pub mixing: f64,
    pub init: InitialGuess,
    pub eigen: EigenSettings,
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_outer: 500,
            mixing: 0.5,
            init: InitialGuess::Gaussian,
            eigen: EigenSettings {
                tol: 1e-10,
                ..EigenSettings::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeanFieldGroundState<T> {
    /// Nonnegative amplitude with `∫φ² = 1`.
    pub phi0: ScalarField<T>,
    pub rho0: DensityField<T>,
    /// Multiplier: Rayleigh quotient of the final linear operator.
    pub mu0: T,
    pub energy: T,
    pub kinetic: T,
    pub potential_energy: T,
    /// `α = ∇ρ₀/ρ₀`, one field per axis.
    pub drift: Vec<ScalarField<T>>,
    pub residual_norm: T,
    pub iterations: usize,
    /// Set when the interaction kernel fails the spectral positivity check,
    /// so the minimizer need not be unique.
    pub uniqueness_warning: bool,
}

impl<T: Real> MeanFieldGroundState<T> {
    /// Optimal ergodic cost; equal to the minimal energy.
    pub fn value(&self) -> T {
        self.energy
    }
}

fn check_normalized<T: Real>(phi: &ScalarField<T>) -> Result<()> {
    let mass = integrate(&phi.map(|v| v * v), None)?;
    if (mass - T::one()).abs() > T::tol(1e-8) {
        return Err(Error::Normalization {
            mass: mass.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `2 Σ_a ∫|∂_a φ|²`, i.e. `½∫|∇ρ|²/ρ` for `ρ = φ²`.
pub fn kinetic_energy<T: Real>(phi: &ScalarField<T>) -> Result<T> {
    let mut k = T::zero();
    for a in 0..phi.grid().dims() {
        k = k + dirichlet_form(phi, a)?;
    }
    Ok(T::lit(2.0) * k)
}

pub fn energy<T: Real>(phi: &ScalarField<T>, potential: &MeanFieldPotential<T>) -> Result<EnergySplit<T>> {
    check_normalized(phi)?;
    let rho = DensityField::from_amplitude(phi)?;
    let kinetic = kinetic_energy(phi)?;
    let pot = integrate(&potential.evaluate(&rho)?, Some(rho.as_field()))?;
    Ok(EnergySplit {
        total: kinetic + pot,
        kinetic,
        potential: pot,
    })
}

/// `(-4Δ + 2U) φ` for a given potential field `U`.
pub(crate) fn apply_hamiltonian<T: Real>(phi: &ScalarField<T>, u: &ScalarField<T>) -> Result<ScalarField<T>> {
    let lap = laplacian(phi)?;
    let k = T::lit(KINETIC);
    let two = T::lit(2.0);
    let kin = lap.zip_with(phi, |l, _| -k * l)?;
    let pot = u.zip_with(phi, |u, p| two * u * p)?;
    kin.zip_with(&pot, |a, b| a + b)
}

/// `<φ, Hφ> / <φ, φ>` in the trapezoid inner product.
pub(crate) fn rayleigh<T: Real>(phi: &ScalarField<T>, u: &ScalarField<T>) -> Result<T> {
    let hphi = apply_hamiltonian(phi, u)?;
    Ok(inner_product(phi, &hphi)? / inner_product(phi, phi)?)
}

/// `‖(-4Δ + 2U - μ) φ‖ / ‖φ‖` in the trapezoid norm.
pub(crate) fn equation_residual<T: Real>(phi: &ScalarField<T>, u: &ScalarField<T>, mu: T) -> Result<T> {
    let hphi = apply_hamiltonian(phi, u)?;
    let r = hphi.zip_with(phi, |h, p| h - mu * p)?;
    Ok((inner_product(&r, &r)? / inner_product(phi, phi)?).sqrt())
}

/// Residual of the self-consistent equation at the state's own density.
pub fn residual<T: Real>(state: &MeanFieldGroundState<T>, potential: &MeanFieldPotential<T>) -> Result<T> {
    let w = potential.effective_field(&state.rho0)?;
    equation_residual(&state.phi0, &w, state.mu0)
}

/// `2E + 2∫∫(v0(y) + g v1(x - y)) ρ₀(x) ρ₀(y)`, which equals the multiplier
/// at a critical point.
pub fn chemical_potential<T: Real>(state: &MeanFieldGroundState<T>, potential: &MeanFieldPotential<T>) -> Result<T> {
    let two = T::lit(2.0);
    Ok(two * state.energy + two * potential.derivative_pairing(&state.rho0)?)
}

/// `∇ρ/ρ`, evaluated as the gradient of `log ρ`. Where `ρ` falls below
/// `DRIFT_FLOOR · max ρ` each component takes the value of the nearest
/// admissible node on its grid line (zero if the line has none).
pub fn optimal_drift<T: Real>(rho: &DensityField<T>) -> Result<Vec<ScalarField<T>>> {
    let top = rho.as_field().max();
    let floor = T::lit(DRIFT_FLOOR) * top;
    let tiny = T::min_positive_value();
    let log = rho.as_field().map(|v| v.max(tiny).ln());
    let mut grads = gradient(&log)?;
    let grid = rho.grid();
    let ok: Vec<bool> = rho.values().iter().map(|&v| v > floor).collect();
    for (axis, g) in grads.iter_mut().enumerate() {
        clamp_along_lines(grid, axis, &ok, g.values_mut());
    }
    Ok(grads)
}

fn clamp_along_lines<T: Real>(grid: &UniformGrid<T>, axis: usize, ok: &[bool], values: &mut [T]) {
    let n = grid.points(axis);
    let s = grid.strides()[axis];
    for start in line_starts(grid, axis) {
        let node = |i: usize| start + i * s;
        let admissible: Vec<usize> = (0..n).filter(|&i| ok[node(i)]).collect();
        if admissible.len() == n {
            continue;
        }
        if admissible.is_empty() {
            for i in 0..n {
                values[node(i)] = T::zero();
            }
            continue;
        }
        for i in 0..n {
            if ok[node(i)] {
                continue;
            }
            let nearest = match admissible.partition_point(|&j| j < i) {
                0 => admissible[0],
                p if p == admissible.len() => admissible[p - 1],
                p => {
                    let (a, b) = (admissible[p - 1], admissible[p]);
                    if i - a <= b - i {
                        a
                    } else {
                        b
                    }
                }
            };
            values[node(i)] = values[node(nearest)];
        }
    }
}

/// Second-difference curvature of a 1D field at the node nearest the origin.
fn curvature_at_origin<T: Real>(f: &ScalarField<T>) -> T {
    let grid = f.grid();
    let n = grid.points(0);
    let h = grid.spacing(0);
    let c = ((-grid.lower(0) / h).round().to_usize().unwrap_or(0)).clamp(1, n - 2);
    let v = f.values();
    (v[c - 1] - T::lit(2.0) * v[c] + v[c + 1]) / (h * h)
}

fn initial_density<T: Real>(potential: &MeanFieldPotential<T>, init: InitialGuess) -> Result<DensityField<T>> {
    let grid = potential.grid();
    match init {
        InitialGuess::Uniform => DensityField::new(ScalarField::constant(grid.clone(), T::one())),
        InitialGuess::Gaussian => {
            // -4φ'' + κ x² φ = μ φ has a Gaussian ρ with variance 1/√κ
            let kappa = curvature_at_origin(potential.trap());
            let var = if kappa > T::zero() { T::one() / kappa.sqrt() } else { T::one() };
            let two = T::lit(2.0);
            DensityField::new(ScalarField::from_fn(grid.clone(), |x| (-(x[0] * x[0]) / (two * var)).exp()))
        }
    }
}

fn linear_ground_state<T: Real>(
    w: &ScalarField<T>,
    warm: &[T],
    settings: &EigenSettings,
) -> Result<(ScalarField<T>, usize)> {
    let two = T::lit(2.0);
    let u: Vec<T> = w.values().iter().map(|&v| two * v).collect();
    let umin = u.iter().fold(T::infinity(), |m, &v| m.min(v));
    let op = SchrodingerOperator::new(w.grid().clone(), T::lit(KINETIC), u)?;
    let pre = Preconditioner::tridiagonal(&op, umin - T::one())?;
    let pair = lowest_eigenpair(&op, &pre, warm, settings, None)?;
    let phi = ScalarField::new(w.grid().clone(), pair.vector)?;
    let norm = integrate(&phi.map(|v| v * v), None)?.sqrt();
    Ok((phi.map(|v| v / norm), pair.iterations))
}

/// Fixed-point iteration on the density: freeze `ρ`, take the ground state
/// of `-4Δ + 2W(ρ)`, mix, repeat until the density stops moving.
pub fn solve_ground_state<T: Real>(
    potential: &MeanFieldPotential<T>,
    settings: &MeanFieldSettings,
) -> Result<MeanFieldGroundState<T>> {
    if !(settings.mixing > 0.0 && settings.mixing <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mixing = {} must lie in (0, 1]",
            settings.mixing
        )));
    }
    let uniqueness_warning = match potential.v1() {
        Some(k) => !bochner_check(k)?.pass,
        None => false,
    };
    let tol = T::lit(settings.tol);
    let mix = T::lit(settings.mixing);
    let mut rho = initial_density(potential, settings.init)?;
    let mut warm = rho.amplitude().into_values();
    let mut change = T::infinity();
    for outer in 1..=settings.max_outer {
        let w = potential.effective_field(&rho)?;
        let (phi, _) = linear_ground_state(&w, &warm, &settings.eigen)?;
        let rho_new = DensityField::from_amplitude(&phi)?;
        change = rho_new.as_field().sup_distance(rho.as_field())?;
        warm = phi.values().to_vec();
        if change < tol {
            return finalize(potential, phi, outer, uniqueness_warning);
        }
        rho = rho.mix(&rho_new, mix)?;
    }
    Err(Error::ConvergenceFailure {
        iterations: settings.max_outer,
        residual: change.to_f64_lossy(),
    })
}

fn finalize<T: Real>(
    potential: &MeanFieldPotential<T>,
    phi0: ScalarField<T>,
    iterations: usize,
    uniqueness_warning: bool,
) -> Result<MeanFieldGroundState<T>> {
    if phi0.min() < T::zero() {
        return Err(Error::Consistency("negative ground-state amplitude".into()));
    }
    let rho0 = DensityField::from_amplitude(&phi0)?;
    let w = potential.effective_field(&rho0)?;
    let mu0 = rayleigh(&phi0, &w)?;
    let split = energy(&phi0, potential)?;
    let residual_norm = equation_residual(&phi0, &w, mu0)?;
    let drift = optimal_drift(&rho0)?;
    Ok(MeanFieldGroundState {
        phi0,
        rho0,
        mu0,
        energy: split.total,
        kinetic: split.kinetic,
        potential_energy: split.potential,
        drift,
        residual_norm,
        iterations,
        uniqueness_warning,
    })
}

/// Gaussian-type tail certificate for a 1D ground-state density.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub pass: bool,
    pub upper_pass: bool,
    pub lower_pass: bool,
    /// Lower bound `exp(-a1 ∫₀^{|x|}√V̄ + a3)`.
    pub a1: f64,
    pub a3: f64,
    /// Upper bound `exp(-a2 |x|² + a4)`.
    pub a2: f64,
    pub a4: f64,
    pub radius: f64,
    pub samples: usize,
}

/// Fits both tail bounds on the nodes with `ρ > 1e-12` and `|x| ≥ radius`.
///
/// Rates are measured against the anchor `log ρ(±radius)`: the upper-bound
/// rate at `x` is `(log ρ(R) - log ρ(x)) / (x² - R²)` and the lower-bound rate
/// uses `s(x) - s(R)` with `s(x) = ∫₀^{|x|}√V̄` in the denominator. `a2` is the
/// smallest upper rate and `a1` the largest lower rate; `a4`, `a3` are the
/// tightest offsets valid at every sample. A bound passes when its rate is
/// asymptotically stable: the smallest upper rate on the outer half of the
/// sampled radii is at least 3/4 of the one on the inner half (and positive),
/// and the largest lower rate on the outer half is at most twice the inner one.
pub fn tail_bounds<T: Real>(rho: &DensityField<T>, vbar: &ScalarField<T>, radius: f64) -> Result<TailBoundReport> {
    let grid = rho.grid();
    if grid.dims() != 1 {
        return Err(Error::UnsupportedDimension("tail bounds are checked in 1D".into()));
    }
    grid.ensure_same(vbar.grid())?;
    let xs: Vec<f64> = grid.axis_nodes(0).iter().map(|x| x.to_f64_lossy()).collect();
    let rho: Vec<f64> = rho.values().iter().map(|v| v.to_f64_lossy()).collect();
    let v: Vec<f64> = vbar.values().iter().map(|v| v.to_f64_lossy().max(0.0)).collect();
    let n = xs.len();
    let h = xs[1] - xs[0];

    // s(r) on the nonnegative nodes by cumulative trapezoid from r = 0
    let zero = (-xs[0] / h).round().clamp(0.0, (n - 1) as f64) as usize;
    let sqrt_v = |i: usize| v[i].sqrt();
    let mut s_pos = vec![0.0; n];
    for i in zero + 1..n {
        s_pos[i] = s_pos[i - 1] + 0.5 * h * (sqrt_v(i) + sqrt_v(i - 1));
    }
    let s_at = |r: f64| -> f64 {
        // V̄ is radial: read it from the nonnegative half
        let t = ((r - xs[zero]) / h).clamp(0.0, (n - 1 - zero) as f64);
        let i = (t.floor() as usize).min(n - 2 - zero.min(n - 2));
        let f = t - i as f64;
        let (a, b) = (s_pos[zero + i], s_pos[(zero + i + 1).min(n - 1)]);
        a + f * (b - a)
    };
    let log_at = |x: f64| -> f64 {
        let t = ((x - xs[0]) / h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        let (a, b) = (rho[i].max(1e-300).ln(), rho[i + 1].max(1e-300).ln());
        a + f * (b - a)
    };

    let samples: Vec<usize> = (0..n)
        .filter(|&i| xs[i].abs() > radius + 1e-9 && rho[i] > 1e-12)
        .collect();
    let mut report = TailBoundReport {
        pass: false,
        upper_pass: false,
        lower_pass: false,
        a1: f64::NAN,
        a3: f64::NAN,
        a2: f64::NAN,
        a4: f64::NAN,
        radius,
        samples: samples.len(),
    };
    if samples.len() < 4 {
        return Ok(report);
    }
    let r_max = samples.iter().map(|&i| xs[i].abs()).fold(0.0, f64::max);
    let split = 0.5 * (radius + r_max);
    let s_r = s_at(radius);
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &i in &samples {
        let x = xs[i];
        let anchor = log_at(radius.copysign(x));
        let drop = anchor - rho[i].ln();
        upper.push((x.abs(), drop / (x * x - radius * radius)));
        let ds = s_at(x.abs()) - s_r;
        lower.push((x.abs(), if ds > 0.0 { drop / ds } else { f64::INFINITY }));
    }
    let min_of = |v: &[(f64, f64)], outer: bool| {
        v.iter()
            .filter(|(r, _)| (*r >= split) == outer)
            .map(|(_, q)| *q)
            .fold(f64::INFINITY, f64::min)
    };
    let max_of = |v: &[(f64, f64)], outer: bool| {
        v.iter()
            .filter(|(r, _)| (*r >= split) == outer)
            .map(|(_, q)| *q)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let a2 = upper.iter().map(|u| u.1).fold(f64::INFINITY, f64::min);
    let a1 = lower.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let tail: Vec<usize> = (0..n).filter(|&i| xs[i].abs() >= radius && rho[i] > 1e-12).collect();
    report.a2 = a2;
    report.a4 = tail
        .iter()
        .map(|&i| rho[i].ln() + a2 * xs[i] * xs[i])
        .fold(f64::NEG_INFINITY, f64::max);
    report.a1 = a1;
    report.a3 = tail
        .iter()
        .map(|&i| rho[i].ln() + a1 * s_at(xs[i].abs()))
        .fold(f64::INFINITY, f64::min);
    report.upper_pass = a2 > 0.0 && min_of(&upper, true) >= 0.75 * min_of(&upper, false);
    report.lower_pass = a1.is_finite() && a1 > 0.0 && max_of(&lower, true) <= 2.0 * max_of(&lower, false);
    report.pass = report.upper_pass && report.lower_pass;
    Ok(report)
}

/// Tail certificate of a solved state, with `V̄` read from `V0`.
pub fn tail_bound_check<T: Real>(
    state: &MeanFieldGroundState<T>,
    potential: &MeanFieldPotential<T>,
) -> Result<TailBoundReport> {
    tail_bounds(&state.rho0, potential.trap(), 2.0)
}
