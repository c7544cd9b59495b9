//! Euler–Maruyama simulation of the optimally controlled dynamics
//! `dX = A(X) dt + √2 dW`, with time-averaged running cost and the
//! occupation histogram of one coordinate.
//!
//! Drift and cost fields are read by multilinear interpolation with
//! positions clamped to the grid box. Each path draws from its own ChaCha
//! stream `(seed, path index)`, and path results are merged in index order,
//! so reports do not depend on the thread count.

use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{interpolate, multilinear, DensityField, ScalarField, UniformGrid, MAX_DIMS};
use crate::meanfield::MeanFieldGroundState;
use crate::nparticle::{optimal_drift_n, NParticleGroundState};
use crate::potentials::MeanFieldPotential;
use crate::real::Real;

const TIME_BLOCKS: usize = 16;
/// Largest tolerated fraction of discarded paths.
const MAX_DISCARDED: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Point(Vec<f64>),
    /// Independent coordinates drawn from the reference density.
    Density,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub initial: Initial,
    pub bins: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 200.0,
            burn_in: 10.0,
            n_paths: 64,
            seed: 0,
            initial: Initial::Density,
            bins: 256,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, box_width: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt <= 1e-2 * box_width) {
            return bad(format!("dt = {} must lie in (0, {}]", self.dt, 1e-2 * box_width));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.horizon && self.horizon.is_finite()) {
            return bad(format!("need 0 ≤ burn_in < T, got {} and {}", self.burn_in, self.horizon));
        }
        if self.horizon - self.burn_in < TIME_BLOCKS as f64 * self.dt {
            return bad("recorded window shorter than one step per block".into());
        }
        if self.n_paths == 0 || self.bins == 0 {
            return bad("n_paths and bins must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryStats {
    /// Time- and path-averaged running cost.
    pub cost: f64,
    /// From the spread of block means (16 time blocks per path).
    pub standard_error: f64,
    #[serde(skip)]
    pub histogram: DensityField<f64>,
    pub counts: Vec<u64>,
    pub lower: f64,
    pub upper: f64,
    pub samples: u64,
    /// Mean of `x²` over recorded samples of the histogram coordinate.
    pub mean_square: f64,
    pub tv: f64,
    pub discarded: usize,
}

/// Bin probabilities of a 1D density: piecewise-linear density, integrated
/// on 16 sub-intervals per bin.
pub fn bin_probabilities<T: Real>(rho: &DensityField<T>, lower: f64, upper: f64, bins: usize) -> Result<Vec<f64>> {
    if rho.grid().dims() != 1 {
        return Err(Error::UnsupportedDimension("histograms are one-dimensional".into()));
    }
    let width = (upper - lower) / bins as f64;
    let sub = 16;
    let lo = rho.grid().lower(0).to_f64_lossy();
    let hi = rho.grid().upper(0).to_f64_lossy();
    let mut p = Vec::with_capacity(bins);
    for b in 0..bins {
        let mut s = 0.0;
        for j in 0..sub {
            let x = lower + width * (b as f64 + (j as f64 + 0.5) / sub as f64);
            if x >= lo && x <= hi {
                s += interpolate(rho.as_field(), &[T::lit(x)])?.to_f64_lossy();
            }
        }
        p.push(s * width / sub as f64);
    }
    let total: f64 = p.iter().sum();
    Ok(p.into_iter().map(|v| v / total).collect())
}

fn binned_tv(counts: &[u64], reference: &[f64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    let t = total as f64;
    Ok(0.5 * counts.iter().zip(reference).map(|(&c, &p)| (c as f64 / t - p).abs()).sum::<f64>())
}

fn histogram_density(counts: &[u64], lower: f64, upper: f64) -> Result<DensityField<f64>> {
    let bins = counts.len();
    let width = (upper - lower) / bins as f64;
    // bin centres as grid nodes; a single bin gets a padded two-node grid
    let (grid, values) = if bins >= 2 {
        let g = UniformGrid::line(lower + 0.5 * width, upper - 0.5 * width, bins)?;
        (g, counts.iter().map(|&c| c as f64).collect())
    } else {
        (UniformGrid::line(lower, upper, 2)?, vec![counts[0] as f64; 2])
    };
    DensityField::new(ScalarField::new(grid, values)?)
}

/// Histogram of raw samples of one coordinate.
pub fn histogram_from_samples(samples: &[f64], lower: f64, upper: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &x in samples {
        counts[bin_of(x, lower, upper, bins)] += 1;
    }
    counts
}

#[inline]
fn bin_of(x: f64, lower: f64, upper: f64, bins: usize) -> usize {
    let t = ((x - lower) / (upper - lower) * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

/// Total variation between the recorded histogram and `rho_ref` binned the
/// same way.
pub fn stationarity_check<T: Real>(stats: &TrajectoryStats, rho_ref: &DensityField<T>) -> Result<f64> {
    if stats.samples == 0 {
        return Err(Error::EmptySample);
    }
    let p = bin_probabilities(rho_ref, stats.lower, stats.upper, stats.counts.len())?;
    binned_tv(&stats.counts, &p)
}

/// Tabulated fields on a common grid, read with clamped multilinear
/// interpolation.
struct Tables {
    dims: usize,
    lower: [f64; MAX_DIMS],
    upper: [f64; MAX_DIMS],
    h: [f64; MAX_DIMS],
    n: [usize; MAX_DIMS],
    strides: Vec<usize>,
    drift: Vec<Vec<f64>>,
    cost: Vec<f64>,
}

impl Tables {
    fn new<T: Real>(drift: &[ScalarField<T>], cost: &ScalarField<T>) -> Result<Self> {
        let grid = cost.grid();
        let dims = grid.dims();
        if drift.len() != dims {
            return Err(Error::InvalidParameter(format!(
                "{} drift components for a {dims}-axis grid",
                drift.len()
            )));
        }
        for d in drift {
            grid.ensure_same(d.grid())?;
        }
        let mut t = Tables {
            dims,
            lower: [0.0; MAX_DIMS],
            upper: [0.0; MAX_DIMS],
            h: [0.0; MAX_DIMS],
            n: [0; MAX_DIMS],
            strides: grid.strides(),
            drift: drift.iter().map(|d| d.values().iter().map(|v| v.to_f64_lossy()).collect()).collect(),
            cost: cost.values().iter().map(|v| v.to_f64_lossy()).collect(),
        };
        for a in 0..dims {
            t.lower[a] = grid.lower(a).to_f64_lossy();
            t.upper[a] = grid.upper(a).to_f64_lossy();
            t.h[a] = grid.spacing(a).to_f64_lossy();
            t.n[a] = grid.points(a);
        }
        Ok(t)
    }

    #[inline]
    fn locate(&self, x: &[f64], cell: &mut [usize], frac: &mut [f64]) {
        for a in 0..self.dims {
            let t = ((x[a].clamp(self.lower[a], self.upper[a]) - self.lower[a]) / self.h[a]).max(0.0);
            let i = (t.floor() as usize).min(self.n[a] - 2);
            cell[a] = i;
            frac[a] = (t - i as f64).min(1.0);
        }
    }
}

#[derive(Default)]
struct PathResult {
    block_sum: [f64; TIME_BLOCKS],
    block_len: [u64; TIME_BLOCKS],
    counts: Vec<u64>,
    square_sum: f64,
    ok: bool,
}

fn initial_sampler<T: Real>(reference: &DensityField<T>) -> Result<(WeightedIndex<f64>, Vec<f64>, f64)> {
    let grid = reference.grid();
    let w = grid.weights();
    let weights: Vec<f64> = reference
        .values()
        .iter()
        .zip(&w)
        .map(|(r, w)| (r.to_f64_lossy() * w.to_f64_lossy()).max(0.0))
        .collect();
    let nodes = grid.axis_nodes(0).iter().map(|x| x.to_f64_lossy()).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidDensity(e.to_string()))?;
    Ok((dist, nodes, grid.spacing(0).to_f64_lossy()))
}

/// Shared Euler–Maruyama loop. The running cost at `x` is
/// `(Σ_a |A_a(x)|²/2 + cost(x)) / per`, and the histogram records every
/// coordinate of the state.
fn simulate<T: Real>(
    tables: &Tables,
    per: f64,
    reference: &DensityField<T>,
    config: &SimConfig,
) -> Result<TrajectoryStats> {
    let dims = tables.dims;
    config.validate(tables.upper[0] - tables.lower[0])?;
    if let Initial::Point(p) = &config.initial {
        if p.len() != dims {
            return Err(Error::InvalidParameter(format!(
                "initial point has {} coordinates, expected {dims}",
                p.len()
            )));
        }
    }
    let (lower, upper) = (tables.lower[0], tables.upper[0]);
    let bins = config.bins;
    let steps = (config.horizon / config.dt).round() as u64;
    let burn = (config.burn_in / config.dt).round() as u64;
    let recorded = steps - burn;
    let block_len = recorded.div_ceil(TIME_BLOCKS as u64);
    let sampler = initial_sampler(reference)?;
    let noise = (2.0 * config.dt).sqrt();

    let run_path = |path: usize| -> PathResult {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(path as u64);
        let mut x = [0.0f64; MAX_DIMS];
        match &config.initial {
            Initial::Point(p) => x[..dims].copy_from_slice(p),
            Initial::Density => {
                let (dist, nodes, h) = &sampler;
                for xa in x.iter_mut().take(dims) {
                    let j = dist.sample(&mut rng);
                    *xa = (nodes[j] + h * (rng.gen::<f64>() - 0.5)).clamp(lower, upper);
                }
            }
        }
        let mut out = PathResult {
            counts: vec![0; bins],
            ..PathResult::default()
        };
        let mut cell = [0usize; MAX_DIMS];
        let mut frac = [0.0f64; MAX_DIMS];
        let mut a = [0.0f64; MAX_DIMS];
        for k in 0..steps {
            tables.locate(&x[..dims], &mut cell[..dims], &mut frac[..dims]);
            let mut kinetic = 0.0;
            for d in 0..dims {
                a[d] = multilinear(&tables.drift[d], &tables.strides, &cell[..dims], &frac[..dims]);
                kinetic += 0.5 * a[d] * a[d];
            }
            if k >= burn {
                let c = (kinetic + multilinear(&tables.cost, &tables.strides, &cell[..dims], &frac[..dims])) / per;
                let b = ((k - burn) / block_len) as usize;
                out.block_sum[b] += c;
                out.block_len[b] += 1;
                for &xd in &x[..dims] {
                    out.counts[bin_of(xd, lower, upper, bins)] += 1;
                    out.square_sum += xd * xd;
                }
            }
            for d in 0..dims {
                let xi: f64 = StandardNormal.sample(&mut rng);
                x[d] += a[d] * config.dt + noise * xi;
            }
            if !x[..dims].iter().all(|v| v.is_finite()) {
                return out;
            }
        }
        out.ok = true;
        out
    };
    let results: Vec<PathResult> = (0..config.n_paths).into_par_iter().map(run_path).collect();

    let kept: Vec<&PathResult> = results.iter().filter(|r| r.ok).collect();
    let discarded = results.len() - kept.len();
    if discarded as f64 > MAX_DISCARDED * config.n_paths as f64 || kept.is_empty() {
        return Err(Error::Instability {
            discarded,
            total: config.n_paths,
        });
    }
    let mut counts = vec![0u64; bins];
    let mut means = Vec::with_capacity(kept.len() * TIME_BLOCKS);
    let (mut sum, mut len, mut sq) = (0.0, 0u64, 0.0);
    for r in &kept {
        for (c, &rc) in counts.iter_mut().zip(&r.counts) {
            *c += rc;
        }
        for b in 0..TIME_BLOCKS {
            if r.block_len[b] > 0 {
                means.push(r.block_sum[b] / r.block_len[b] as f64);
                sum += r.block_sum[b];
                len += r.block_len[b];
            }
        }
        sq += r.square_sum;
    }
    let cost = sum / len as f64;
    let mean_of_means = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - mean_of_means).powi(2)).sum::<f64>() / (means.len() - 1).max(1) as f64;
    let samples: u64 = counts.iter().sum();
    let reference_bins = bin_probabilities(reference, lower, upper, bins)?;
    Ok(TrajectoryStats {
        cost,
        standard_error: (var / means.len() as f64).sqrt(),
        histogram: histogram_density(&counts, lower, upper)?,
        tv: binned_tv(&counts, &reference_bins)?,
        counts,
        lower,
        upper,
        samples,
        mean_square: sq / samples as f64,
        discarded,
    })
}

/// One-particle dynamics with drift `drift` and running cost
/// `|α|²/2 + running(x)`; `running` is `𝒱(·, ρ_ref)` frozen at the
/// stationary density.
pub fn simulate_meanfield<T: Real>(
    drift: &ScalarField<T>,
    running: &ScalarField<T>,
    reference: &DensityField<T>,
    config: &SimConfig,
) -> Result<TrajectoryStats> {
    if drift.grid().dims() != 1 {
        return Err(Error::UnsupportedDimension("mean-field dynamics is one-dimensional".into()));
    }
    let tables = Tables::new(std::slice::from_ref(drift), running)?;
    simulate(&tables, 1.0, reference, config)
}

/// Joint N-particle dynamics; cost per particle is
/// `(Σ_i |A_i|²/2 + V_N(x)) / N` and the histogram pools all particles.
pub fn simulate_nparticle<T: Real>(
    drifts: &[ScalarField<T>],
    vn: &ScalarField<T>,
    reference: &DensityField<T>,
    config: &SimConfig,
) -> Result<TrajectoryStats> {
    let tables = Tables::new(drifts, vn)?;
    simulate(&tables, drifts.len() as f64, reference, config)
}

pub fn simulate_meanfield_state<T: Real>(
    mf: &MeanFieldGroundState<T>,
    potential: &MeanFieldPotential<T>,
    config: &SimConfig,
) -> Result<TrajectoryStats> {
    let running = potential.evaluate(&mf.rho0)?;
    simulate_meanfield(&mf.drift[0], &running, &mf.rho0, config)
}

pub fn simulate_nparticle_state<T: Real>(
    state: &NParticleGroundState<T>,
    potential: &MeanFieldPotential<T>,
    config: &SimConfig,
) -> Result<TrajectoryStats> {
    let drifts = optimal_drift_n(state)?;
    let vn = potential.assemble_vn(state.n, state.rho_n.grid())?;
    simulate_nparticle(&drifts, &vn, &state.marginal1, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{solve_ground_state, MeanFieldSettings};
    use crate::nparticle::{solve_linear_ground_state, NParticleSettings};
    use std::f64::consts::SQRT_2;

    fn line() -> UniformGrid<f64> {
        UniformGrid::symmetric_line(8.0, 1025).unwrap()
    }

    fn ou(scale: f64) -> (ScalarField<f64>, ScalarField<f64>, DensityField<f64>) {
        let g = line();
        let drift = ScalarField::from_fn(g.clone(), |x| -scale * SQRT_2 * x[0]);
        let trap = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]);
        let rho = DensityField::new(ScalarField::from_fn(g, |x| (-x[0] * x[0] / SQRT_2).exp())).unwrap();
        (drift, trap, rho)
    }

    fn config(paths: usize, horizon: f64, seed: u64) -> SimConfig {
        SimConfig {
            dt: 1e-3,
            horizon,
            burn_in: 5.0,
            n_paths: paths,
            seed,
            initial: Initial::Point(vec![0.5]),
            bins: 64,
        }
    }

    #[test]
    fn harmonic_cost_and_variance() {
        let (a, v, rho) = ou(1.0);
        let s = simulate_meanfield(&a, &v, &rho, &config(64, 200.0, 1)).unwrap();
        assert!((s.cost - SQRT_2).abs() < 0.02 * SQRT_2, "{}", s.cost);
        assert!((s.mean_square - 1.0 / SQRT_2).abs() < 0.02 / SQRT_2, "{}", s.mean_square);
        assert!(s.tv < 0.02, "{}", s.tv);
        assert!((stationarity_check(&s, &rho).unwrap() - s.tv).abs() < 1e-15);
        let mass = crate::grid::integrate(s.histogram.as_field(), None).unwrap();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn solved_harmonic_state_drives_the_simulation() {
        let p = MeanFieldPotential::harmonic(&line()).unwrap();
        let mf = solve_ground_state(&p, &MeanFieldSettings::default()).unwrap();
        let s = simulate_meanfield_state(&mf, &p, &config(32, 100.0, 3)).unwrap();
        assert!((s.cost - SQRT_2).abs() < 0.03 * SQRT_2, "{}", s.cost);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let (a, v, rho) = ou(1.0);
        let c = config(8, 20.0, 42);
        let first = simulate_meanfield(&a, &v, &rho, &c).unwrap();
        let second = simulate_meanfield(&a, &v, &rho, &c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let third = pool.install(|| simulate_meanfield(&a, &v, &rho, &c).unwrap());
        assert_eq!(first.cost.to_bits(), second.cost.to_bits());
        assert_eq!(first.cost.to_bits(), third.cost.to_bits());
        assert_eq!(first.counts, third.counts);
        let other = simulate_meanfield(&a, &v, &rho, &SimConfig { seed: 43, ..c }).unwrap();
        assert_ne!(first.cost.to_bits(), other.cost.to_bits());
    }

    #[test]
    fn adding_paths_keeps_existing_streams() {
        let (a, v, rho) = ou(1.0);
        let one = simulate_meanfield(&a, &v, &rho, &config(1, 20.0, 5)).unwrap();
        let mut two = config(2, 20.0, 5);
        two.n_paths = 2;
        let both = simulate_meanfield(&a, &v, &rho, &two).unwrap();
        assert!(one.counts.iter().zip(&both.counts).all(|(a, b)| a <= b));
    }

    #[test]
    fn more_paths_shrink_the_error() {
        let (a, v, rho) = ou(1.0);
        let small = simulate_meanfield(&a, &v, &rho, &config(32, 40.0, 9)).unwrap();
        let large = simulate_meanfield(&a, &v, &rho, &config(64, 40.0, 9)).unwrap();
        let ratio = small.standard_error / large.standard_error;
        assert!((ratio / SQRT_2 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn halving_dt_is_consistent() {
        let (a, v, rho) = ou(1.0);
        let coarse = simulate_meanfield(&a, &v, &rho, &SimConfig { dt: 2e-3, ..config(32, 60.0, 4) }).unwrap();
        let fine = simulate_meanfield(&a, &v, &rho, &SimConfig { dt: 1e-3, ..config(32, 60.0, 4) }).unwrap();
        let se = (coarse.standard_error.powi(2) + fine.standard_error.powi(2)).sqrt();
        assert!((coarse.cost - fine.cost).abs() < 3.0 * se);
    }

    #[test]
    fn free_diffusion_spreads_linearly() {
        let g = UniformGrid::<f64>::symmetric_line(60.0, 1201).unwrap();
        let zero = ScalarField::zeros(g.clone());
        let rho = DensityField::new(ScalarField::constant(g, 1.0)).unwrap();
        let c = SimConfig {
            dt: 1e-3,
            horizon: 1.0,
            burn_in: 0.0,
            n_paths: 2000,
            seed: 8,
            initial: Initial::Point(vec![0.0]),
            bins: 64,
        };
        let s = simulate_meanfield(&zero, &zero, &rho, &c).unwrap();
        assert_eq!(s.cost, 0.0);
        // E x_t² = 2t, averaged over t ∈ [0, 1]
        assert!((s.mean_square - 1.0).abs() < 0.05, "{}", s.mean_square);
    }

    #[test]
    fn direct_sampling_is_stationary_and_wrong_drift_is_not() {
        let (_, v, rho) = ou(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sd = 2f64.powf(-0.25);
        let samples: Vec<f64> = (0..1_000_000)
            .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let counts = histogram_from_samples(&samples, -8.0, 8.0, 256);
        let p = bin_probabilities(&rho, -8.0, 8.0, 256).unwrap();
        assert!(binned_tv(&counts, &p).unwrap() <= 0.01);

        let (half, _, _) = ou(0.5);
        let s = simulate_meanfield(&half, &v, &rho, &config(32, 100.0, 2)).unwrap();
        assert!(s.tv > 0.05, "{}", s.tv);
        assert!(matches!(binned_tv(&[0, 0], &[0.5, 0.5]), Err(Error::EmptySample)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (a, v, rho) = ou(1.0);
        for bad in [
            SimConfig { dt: 1.0, ..config(4, 10.0, 0) },
            SimConfig { burn_in: 20.0, ..config(4, 10.0, 0) },
            SimConfig { n_paths: 0, ..config(4, 10.0, 0) },
        ] {
            assert!(simulate_meanfield(&a, &v, &rho, &bad).is_err());
        }
    }

    #[test]
    fn free_pair_cost_and_exchangeability() {
        let p = MeanFieldPotential::harmonic(&UniformGrid::symmetric_line(7.0, 121).unwrap()).unwrap();
        let s = solve_linear_ground_state(&p, 2, &NParticleSettings::default()).unwrap();
        let run = |x0: Vec<f64>, seed| {
            let c = SimConfig {
                initial: Initial::Point(x0),
                ..config(32, 100.0, seed)
            };
            simulate_nparticle_state(&s, &p, &c).unwrap()
        };
        let a = run(vec![0.8, -0.3], 21);
        let b = run(vec![-0.3, 0.8], 22);
        assert!((a.cost - SQRT_2).abs() < 0.03 * SQRT_2, "{}", a.cost);
        let se = (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt();
        assert!((a.cost - b.cost).abs() < 3.0 * se);
    }
}
