//! Chaos and convergence metrics between N-particle and mean-field states:
//! Fisher information, entropies, distances between densities, the drift
//! discrepancy and the path-space entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    dirichlet_form, gradient, integrate, line_starts, line_weight, marginalize, symmetrize, DensityField,
    ScalarField, UniformGrid, MAX_DIMS,
};
use crate::meanfield::MeanFieldGroundState;
use crate::nparticle::NParticleGroundState;
use crate::potentials::MeanFieldPotential;
use crate::real::Real;

/// Nodes below this fraction of the maximum are left out of log-quadratures.
pub const ENTROPY_FLOOR: f64 = 1e-14;
/// Quantile nodes used by the 1D Wasserstein distance.
pub const QUANTILE_NODES: usize = 4096;

/// `I(ρ) = ∫|∇ρ|²/ρ`, divided by the number of axes when `normalized`.
pub fn fisher_information<T: Real>(rho: &DensityField<T>, normalized: bool) -> Result<T> {
    let floor = T::lit(ENTROPY_FLOOR) * rho.as_field().max();
    let grads = gradient(rho.as_field())?;
    let w = rho.grid().weights();
    let v = rho.values();
    let mut total = T::zero();
    for (k, &r) in v.iter().enumerate() {
        if r > floor {
            let sq = grads.iter().fold(T::zero(), |s, g| s + g.values()[k] * g.values()[k]);
            total = total + w[k] * sq / r;
        }
    }
    Ok(if normalized {
        total / T::from_usize_lossy(rho.grid().dims())
    } else {
        total
    })
}

/// `∫ρ log ρ` over nodes above the entropy floor.
pub fn entropy<T: Real>(rho: &DensityField<T>) -> T {
    let floor = T::lit(ENTROPY_FLOOR) * rho.as_field().max();
    let w = rho.grid().weights();
    rho.values()
        .iter()
        .zip(&w)
        .filter(|(&r, _)| r > floor)
        .fold(T::zero(), |s, (&r, &w)| s + w * r * r.ln())
}

/// `∫ρ₁ log(ρ₁/ρ₂)` over nodes where `ρ₁` is above the entropy floor.
/// Infinite when `ρ₂` vanishes at such a node.
pub fn relative_entropy<T: Real>(rho1: &DensityField<T>, rho2: &DensityField<T>) -> Result<T> {
    rho1.grid().ensure_same(rho2.grid())?;
    let floor = T::lit(ENTROPY_FLOOR) * rho1.as_field().max();
    let w = rho1.grid().weights();
    let mut total = T::zero();
    for ((&a, &b), &w) in rho1.values().iter().zip(rho2.values()).zip(&w) {
        if a > floor {
            if b < T::min_positive_value() {
                return Ok(T::infinity());
            }
            total = total + w * a * (a / b).ln();
        }
    }
    Ok(total)
}

/// Both evaluations of `(1/N) H_N(ρ_N | ρ₀^⊗N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyPerParticle<T> {
    /// N-dimensional quadrature of `ρ_N log(ρ_N / ρ₀^⊗N)`.
    pub direct: T,
    /// `(1/N) ∫ρ_N log ρ_N - ∫ρ^{(1)} log ρ₀`.
    pub decomposition: T,
}

fn ensure_axis_grid<T: Real>(state: &NParticleGroundState<T>, mf: &MeanFieldGroundState<T>) -> Result<()> {
    let g = state.rho_n.grid();
    for a in 0..g.dims() {
        g.axis_grid(a)?.ensure_same(mf.rho0.grid())?;
    }
    Ok(())
}

/// Relative entropy per particle of the N-particle ground state with respect
/// to the product of mean-field ground states, computed directly and by the
/// one-particle decomposition. Disagreement beyond `1e-4` is an error.
pub fn entropy_per_particle<T: Real>(
    state: &NParticleGroundState<T>,
    mf: &MeanFieldGroundState<T>,
) -> Result<EntropyPerParticle<T>> {
    ensure_axis_grid(state, mf)?;
    let n = state.n;
    let nn = T::from_usize_lossy(n);
    let grid = state.rho_n.grid();
    let rho = state.rho_n.values();
    let floor = T::lit(ENTROPY_FLOOR) * state.rho_n.as_field().max();
    let tiny = T::min_positive_value();
    let log0: Vec<T> = mf.rho0.values().iter().map(|&r| r.max(tiny).ln()).collect();
    let w = grid.weights();
    let mut idx = [0usize; MAX_DIMS];
    let mut direct = T::zero();
    for (k, &r) in rho.iter().enumerate() {
        if r > floor {
            grid.multi_index(k, &mut idx[..n]);
            if idx[..n].iter().any(|&i| mf.rho0.values()[i] < tiny) {
                return Ok(EntropyPerParticle {
                    direct: T::infinity(),
                    decomposition: T::infinity(),
                });
            }
            let lp = idx[..n].iter().fold(T::zero(), |s, &i| s + log0[i]);
            direct = direct + w[k] * r * (r.ln() - lp);
        }
    }
    direct = direct / nn;
    let cross = integrate(
        &ScalarField::new(mf.rho0.grid().clone(), log0)?,
        Some(state.marginal1.as_field()),
    )?;
    let decomposition = entropy(&state.rho_n) / nn - cross;
    if (direct - decomposition).abs() > T::lit(1e-4) {
        return Err(Error::Consistency(format!(
            "entropy per particle: direct {direct} vs decomposition {decomposition}"
        )));
    }
    Ok(EntropyPerParticle { direct, decomposition })
}

/// `½∫|ρ₁ - ρ₂|`.
pub fn tv_distance<T: Real>(rho1: &DensityField<T>, rho2: &DensityField<T>) -> Result<T> {
    Ok(T::lit(0.5) * l1_distance(rho1, rho2)?)
}

pub fn l1_distance<T: Real>(rho1: &DensityField<T>, rho2: &DensityField<T>) -> Result<T> {
    let d = rho1.as_field().zip_with(rho2.as_field(), |a, b| (a - b).abs())?;
    integrate(&d, None)
}

/// `∫‖x‖^k ρ`.
pub fn moment<T: Real>(rho: &DensityField<T>, k: f64) -> Result<T> {
    let kk = T::lit(k);
    let g = rho.grid();
    let r = ScalarField::from_fn(g.clone(), |x| {
        let n2 = x.iter().fold(T::zero(), |s, &v| s + v * v);
        if n2 == T::zero() {
            T::zero()
        } else {
            n2.sqrt().powf(kk)
        }
    });
    integrate(&r, Some(rho.as_field()))
}

fn quantiles<T: Real>(rho: &DensityField<T>) -> Vec<f64> {
    let xs: Vec<f64> = rho.grid().axis_nodes(0).iter().map(|x| x.to_f64_lossy()).collect();
    let v: Vec<f64> = rho.values().iter().map(|x| x.to_f64_lossy()).collect();
    let mut cdf = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (v[i] + v[i - 1]);
    }
    let total = cdf[xs.len() - 1];
    cdf.iter_mut().for_each(|c| *c /= total);
    let mut out = Vec::with_capacity(QUANTILE_NODES);
    let mut j = 1;
    for q in 0..QUANTILE_NODES {
        let u = (q as f64 + 0.5) / QUANTILE_NODES as f64;
        while j < xs.len() - 1 && cdf[j] < u {
            j += 1;
        }
        let (c0, c1) = (cdf[j - 1], cdf[j]);
        let t = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.0 };
        out.push(xs[j - 1] + t * (xs[j] - xs[j - 1]));
    }
    out
}

/// Exact 1D `W_p` through quantile functions: CDFs by cumulative trapezoid,
/// quantiles by linear interpolation at midpoint levels.
pub fn wasserstein_1d<T: Real>(rho1: &DensityField<T>, rho2: &DensityField<T>, p: f64) -> Result<T> {
    if rho1.grid().dims() != 1 || rho2.grid().dims() != 1 {
        return Err(Error::UnsupportedDimension(
            "exact Wasserstein distances are 1D only; use wasserstein_bound".into(),
        ));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [1, 2]")));
    }
    let (q1, q2) = (quantiles(rho1), quantiles(rho2));
    let mean = q1.iter().zip(&q2).map(|(a, b)| (a - b).abs().powf(p)).sum::<f64>() / QUANTILE_NODES as f64;
    Ok(T::lit(mean.powf(1.0 / p)))
}

/// Moment bound `W_p ≤ 2^{1-1/p} (M_k(ρ₁) + M_k(ρ₂))^{1/k} (2 d_TV)^{(k-p)/(kp)}`,
/// valid in any dimension.
pub fn wasserstein_bound<T: Real>(rho1: &DensityField<T>, rho2: &DensityField<T>, p: f64, k: f64) -> Result<T> {
    if !(p >= 1.0 && p < k) {
        return Err(Error::InvalidExponent { p, k });
    }
    let tv = tv_distance(rho1, rho2)?.to_f64_lossy();
    let mk = (moment(rho1, k)? + moment(rho2, k)?).to_f64_lossy();
    let value = 2f64.powf(1.0 - 1.0 / p) * mk.powf(1.0 / k) * (2.0 * tv).powf((k - p) / (k * p));
    Ok(T::lit(value))
}

/// Mean-square mismatch between the N-particle drift of particle 1 and the
/// mean-field drift at its position, under `ρ_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftDiscrepancy<T> {
    /// `4∫|∇₁(φ_N/φ₀(x₁))|² φ₀(x₁)²`, the same integrand rewritten in the
    /// ground-state frame and summed over grid edges.
    pub direct: T,
    /// `4∫|∇₁φ_N|² - μ₀ + 2∫W(x₁) ρ_N` with `W` the mean-field effective field.
    pub formula: T,
    /// Node quadrature of `|∇₁ log ρ_N - α(x₁)|² ρ_N` with central differences.
    pub pointwise: T,
}

/// Edge quadrature of the drift mismatch only.
pub fn drift_discrepancy_direct<T: Real>(state: &NParticleGroundState<T>, mf: &MeanFieldGroundState<T>) -> Result<T> {
    ensure_axis_grid(state, mf)?;
    let grid = state.phi_n.grid();
    let phi = state.phi_n.values();
    let phi0 = mf.phi0.values();
    let n = grid.points(0);
    let s = grid.strides()[0];
    let h = grid.spacing(0);
    let aw: Vec<Vec<T>> = (0..grid.dims()).map(|a| grid.axis_weights(a)).collect();
    let mut total = T::zero();
    for start in line_starts(grid, 0) {
        let w = line_weight(grid, &aw, 0, start);
        let mut line = T::zero();
        for i in 0..n - 1 {
            let (a, b) = (phi0[i], phi0[i + 1]);
            if a <= T::zero() || b <= T::zero() {
                continue;
            }
            // φ₀(i)φ₀(i+1) (u_{i+1} - u_i)² with u = φ_N/φ₀, without dividing by tails
            let r = (a / b).sqrt();
            let d = phi[start + (i + 1) * s] * r - phi[start + i * s] / r;
            line = line + d * d;
        }
        total = total + w * line;
    }
    Ok(T::lit(4.0) * total / h)
}

pub fn drift_discrepancy<T: Real>(
    state: &NParticleGroundState<T>,
    mf: &MeanFieldGroundState<T>,
    potential: &MeanFieldPotential<T>,
) -> Result<DriftDiscrepancy<T>> {
    let direct = drift_discrepancy_direct(state, mf)?;
    let four = T::lit(4.0);
    let w = potential.effective_field(&mf.rho0)?;
    let formula = four * dirichlet_form(&state.phi_n, 0)? - mf.mu0
        + T::lit(2.0) * integrate(&w, Some(state.marginal1.as_field()))?;

    let a_n = crate::nparticle::optimal_drift_n(state)?;
    let alpha = &mf.drift[0];
    let grid = state.rho_n.grid();
    let dims = grid.dims();
    let wts = grid.weights();
    let mut idx = [0usize; MAX_DIMS];
    let mut pointwise = T::zero();
    for (k, &r) in state.rho_n.values().iter().enumerate() {
        grid.multi_index(k, &mut idx[..dims]);
        let d = a_n[0].values()[k] - alpha.values()[idx[0]];
        pointwise = pointwise + wts[k] * d * d * r;
    }
    Ok(DriftDiscrepancy {
        direct,
        formula,
        pointwise,
    })
}

/// Constant and initial-law sign in the path-space entropy
/// `sign · (1/N)H_N(ρ_N|ρ₀^⊗N) + c · T · D_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathEntropyConvention {
    pub constant: f64,
    pub initial_sign: f64,
}

impl PathEntropyConvention {
    /// Chain rule for relative entropy with diffusion coefficient `√2`.
    pub const CANONICAL: Self = Self {
        constant: 0.25,
        initial_sign: 1.0,
    };
    /// Factor `1/2` and a negative initial-law term.
    pub const AS_PRINTED: Self = Self {
        constant: 0.5,
        initial_sign: -1.0,
    };

    pub fn new(constant: f64, initial_sign: f64) -> Result<Self> {
        if constant != 0.25 && constant != 0.5 {
            return Err(Error::InvalidParameter(format!(
                "path-entropy constant {constant} must be 1/4 or 1/2"
            )));
        }
        if initial_sign != 1.0 && initial_sign != -1.0 {
            return Err(Error::InvalidParameter("initial-law sign must be ±1".into()));
        }
        Ok(Self { constant, initial_sign })
    }
}

impl Default for PathEntropyConvention {
    fn default() -> Self {
        Self::CANONICAL
    }
}

/// Per-particle relative entropy of the stationary N-particle path law with
/// respect to the product of mean-field path laws on `[0, horizon]`.
pub fn path_entropy_value<T: Real>(
    entropy_per_particle: T,
    discrepancy: T,
    horizon: f64,
    convention: PathEntropyConvention,
) -> Result<T> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    Ok(T::lit(convention.initial_sign) * entropy_per_particle
        + T::lit(convention.constant * horizon) * discrepancy)
}

pub fn path_entropy<T: Real>(
    state: &NParticleGroundState<T>,
    mf: &MeanFieldGroundState<T>,
    horizon: f64,
    convention: PathEntropyConvention,
) -> Result<T> {
    let h = entropy_per_particle(state, mf)?.direct;
    let d = drift_discrepancy_direct(state, mf)?;
    path_entropy_value(h, d, horizon, convention)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherStructureReport {
    pub instances: usize,
    pub superadditivity_pass: bool,
    pub monotonicity_pass: bool,
    pub product_equality_pass: bool,
    /// Smallest `I_N - I_ℓ - I_{N-ℓ}` over all instances and splits.
    pub min_superadditivity_gap: f64,
    /// Largest `𝓘_ℓ(ρ^{(ℓ)}) - 𝓘_N(ρ_N)`; nonpositive when monotone.
    pub max_monotonicity_excess: f64,
    pub max_product_error: f64,
}

impl FisherStructureReport {
    pub fn pass(&self) -> bool {
        self.superadditivity_pass && self.monotonicity_pass && self.product_equality_pass
    }
}

fn gaussian_line(grid: &UniformGrid<f64>, c: f64, s: f64) -> Vec<f64> {
    grid.axis_nodes(0).iter().map(|x| (-(x - c).powi(2) / (2.0 * s * s)).exp()).collect()
}

fn product_field(big: &UniformGrid<f64>, lines: &[Vec<f64>]) -> Vec<f64> {
    let n = big.dims();
    let mut idx = [0usize; MAX_DIMS];
    (0..big.len())
        .map(|k| {
            big.multi_index(k, &mut idx[..n]);
            (0..n).fold(1.0, |p, a| p * lines[a][idx[a]])
        })
        .collect()
}

/// Randomized check of Fisher-information structure on symmetric densities:
/// superadditivity over every split `ℓ + (N-ℓ)`, monotonicity of the
/// normalized information along marginals, and additivity on products.
/// Half of the instances are symmetrized mixtures of two shifted product
/// Gaussians, half are products; `N` alternates between 2 and 3.
pub fn fisher_structure_tests(instances: usize, seed: u64) -> Result<FisherStructureReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line2 = UniformGrid::<f64>::symmetric_line(7.0, 71)?;
    let line3 = UniformGrid::<f64>::symmetric_line(7.0, 41)?;
    let tol = 1e-6;
    let mut report = FisherStructureReport {
        instances,
        superadditivity_pass: true,
        monotonicity_pass: true,
        product_equality_pass: true,
        min_superadditivity_gap: f64::INFINITY,
        max_monotonicity_excess: f64::NEG_INFINITY,
        max_product_error: 0.0,
    };
    for k in 0..instances {
        let n = 2 + k % 2;
        let line = if n == 2 { &line2 } else { &line3 };
        let big = line.power(n)?;
        let rho = if (k / 2) % 2 == 0 {
            let c = rng.gen_range(-1.0..1.0);
            let s = rng.gen_range(0.6..1.4);
            let one = gaussian_line(line, c, s);
            let lines = vec![one.clone(); n];
            let rho = DensityField::new(ScalarField::new(big.clone(), product_field(&big, &lines))?)?;
            let single = DensityField::new(ScalarField::new(line.clone(), one)?)?;
            let err = (fisher_information(&rho, true)? - fisher_information(&single, false)?).abs();
            report.max_product_error = report.max_product_error.max(err);
            rho
        } else {
            let mut parts = Vec::new();
            for _ in 0..2 {
                let lines: Vec<Vec<f64>> = (0..n)
                    .map(|_| gaussian_line(line, rng.gen_range(-1.5..1.5), rng.gen_range(0.6..1.2)))
                    .collect();
                parts.push(product_field(&big, &lines));
            }
            let t = rng.gen_range(0.2..0.8);
            let mix: Vec<f64> = parts[0].iter().zip(&parts[1]).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            DensityField::new(symmetrize(&ScalarField::new(big.clone(), mix)?)?)?
        };
        let i_n = fisher_information(&rho, false)?;
        for l in 1..n {
            let left = marginalize(&rho, &(0..l).collect::<Vec<_>>())?;
            let right = marginalize(&rho, &(l..n).collect::<Vec<_>>())?;
            let gap = i_n - fisher_information(&left, false)? - fisher_information(&right, false)?;
            report.min_superadditivity_gap = report.min_superadditivity_gap.min(gap);
            let excess = fisher_information(&left, true)? - i_n / n as f64;
            report.max_monotonicity_excess = report.max_monotonicity_excess.max(excess);
        }
    }
    report.superadditivity_pass = report.min_superadditivity_gap >= -tol;
    report.monotonicity_pass = report.max_monotonicity_excess <= tol;
    report.product_equality_pass = report.max_product_error <= tol;
    Ok(report)
}

/// Mean-field reference row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFieldRow {
    pub value: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub mu0: f64,
    /// `∫ρ₀ log ρ₀`.
    pub entropy: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl MeanFieldRow {
    pub fn new<T: Real>(mf: &MeanFieldGroundState<T>) -> Self {
        Self {
            value: mf.energy.to_f64_lossy(),
            kinetic: mf.kinetic.to_f64_lossy(),
            potential: mf.potential_energy.to_f64_lossy(),
            mu0: mf.mu0.to_f64_lossy(),
            entropy: entropy(&mf.rho0).to_f64_lossy(),
            residual_norm: mf.residual_norm.to_f64_lossy(),
            iterations: mf.iterations,
        }
    }
}

/// One row of the convergence table, for a fixed particle count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub mu_n: f64,
    pub entropy_per_particle: f64,
    pub marginal_l1_gap: f64,
    pub marginal_tv: f64,
    pub marginal_w1: f64,
    pub marginal_w2: f64,
    pub drift_discrepancy: f64,
    pub path_entropy: f64,
    pub moment: f64,
    // supplementary columns
    pub mu_per_particle_form: f64,
    /// Mean-field energy re-solved on this row's axis grid.
    pub meanfield_energy: f64,
    pub entropy_decomposition: f64,
    pub marginal_relative_entropy: f64,
    pub drift_discrepancy_formula: f64,
    pub drift_discrepancy_pointwise: f64,
    pub residual_norm: f64,
    pub points_per_axis: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct RowSettings {
    pub horizon: f64,
    pub convention: PathEntropyConvention,
    pub moment_order: f64,
}

impl Default for RowSettings {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            convention: PathEntropyConvention::CANONICAL,
            moment_order: 2.0,
        }
    }
}

/// Every metric of one N-row; `mf` must be solved on the same axis grid.
pub fn convergence_row<T: Real>(
    state: &NParticleGroundState<T>,
    mf: &MeanFieldGroundState<T>,
    potential: &MeanFieldPotential<T>,
    settings: &RowSettings,
) -> Result<ConvergenceRow> {
    let h = entropy_per_particle(state, mf)?;
    let d = drift_discrepancy(state, mf, potential)?;
    let m1 = &state.marginal1;
    let f = |v: T| v.to_f64_lossy();
    Ok(ConvergenceRow {
        n: state.n,
        energy: f(state.energy),
        kinetic: f(state.kinetic),
        potential: f(state.potential_energy),
        mu_n: f(state.mu_n),
        entropy_per_particle: f(h.direct),
        marginal_l1_gap: f(l1_distance(m1, &mf.rho0)?),
        marginal_tv: f(tv_distance(m1, &mf.rho0)?),
        marginal_w1: f(wasserstein_1d(m1, &mf.rho0, 1.0)?),
        marginal_w2: f(wasserstein_1d(m1, &mf.rho0, 2.0)?),
        drift_discrepancy: f(d.direct),
        path_entropy: f(path_entropy_value(h.direct, d.direct, settings.horizon, settings.convention)?),
        moment: f(moment(m1, settings.moment_order)?),
        mu_per_particle_form: f(state.mu_per_particle_form()),
        meanfield_energy: f(mf.energy),
        entropy_decomposition: f(h.decomposition),
        marginal_relative_entropy: f(relative_entropy(m1, &mf.rho0)?),
        drift_discrepancy_formula: f(d.formula),
        drift_discrepancy_pointwise: f(d.pointwise),
        residual_norm: f(state.residual_norm),
        points_per_axis: state.rho_n.grid().points(0),
    })
}

/// Mean-field reference plus one row per particle count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub report_version: u32,
    pub reference: MeanFieldRow,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn new(reference: MeanFieldRow, rows: Vec<ConvergenceRow>) -> Self {
        Self {
            report_version: 1,
            reference,
            rows,
        }
    }
}
