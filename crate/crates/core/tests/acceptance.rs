//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, Normal};

use mvlab::diagnostics::{
    drift_discrepancy, fisher_information, fisher_structure_tests, relative_entropy, tv_distance, wasserstein_1d,
    wasserstein_bound,
};
use mvlab::grid::{DensityField, ScalarField, UniformGrid};
use mvlab::meanfield::{solve_ground_state, MeanFieldSettings};
use mvlab::nparticle::{energy_n, solve_linear_ground_state, tensor_power, NParticleSettings};
use mvlab::potentials::{bochner_check, qv_check, Kernel, MeanFieldPotential, TrapPolynomial};
use mvlab::report::{convergence_csv, RunReport};
use mvlab::runner::run_experiment;
use mvlab::scaling::{kernel_mass, scaling_sweep, ScalingScenario, ScalingSettings};
use mvlab::scenario::parse_scenario;
use mvlab::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian(grid: &UniformGrid<f64>, mean: f64, var: f64) -> DensityField<f64> {
    let n = Normal::new(mean, var.sqrt()).unwrap();
    DensityField::new(ScalarField::from_fn(grid.clone(), |x| n.pdf(x[0]))).unwrap()
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn run(text: &str) -> Result<RunReport> {
    run_experiment(&parse_scenario(text, Path::new("."))?)
}

/// Relative Euler–Lagrange residuals collected across the suite.
#[derive(Default)]
struct Residuals(Vec<(String, f64)>);

impl Residuals {
    fn push(&mut self, label: impl Into<String>, residual: f64, mu: f64) {
        self.0.push((label.into(), residual / mu.abs()));
    }

    fn add_report(&mut self, tag: &str, r: &RunReport) {
        let m = &r.convergence.reference;
        self.push(format!("{tag} meanfield"), m.residual_norm, m.mu0);
        for row in &r.convergence.rows {
            self.push(format!("{tag} N={}", row.n), row.residual_norm, row.mu_n);
        }
    }
}

const INTERACTING: &str = r#"
[grid]
extent = 8.0
points = 1025
[potential]
v1 = "gaussian(1.0)"
g = 0.5
[nparticle]
N_list = [2, 3, 4]
"#;

fn harmonic_oracle(res: &mut Residuals) -> Result<Outcome> {
    let start = Instant::now();
    let grid = UniformGrid::<f64>::symmetric_line(8.0, 1025)?;
    let potential = MeanFieldPotential::harmonic(&grid)?;
    let s = solve_ground_state(&potential, &MeanFieldSettings::default())?;
    let elapsed = start.elapsed().as_secs_f64();
    res.push("harmonic meanfield", s.residual_norm, s.mu0);
    let exact = gaussian(&grid, 0.0, 1.0 / SQRT_2);
    let l1: f64 = s
        .rho0
        .values()
        .iter()
        .zip(exact.values())
        .zip(grid.weights())
        .map(|((a, b), w)| w * (a - b).abs())
        .sum();
    let pass = (s.value() - SQRT_2).abs() <= 1e-3
        && (s.mu0 - 2.0 * SQRT_2).abs() <= 1e-3
        && l1 <= 1e-3
        && elapsed < 10.0;
    Ok(outcome(
        pass,
        format!("value {:.8}, mu0 {:.8}, L1 {l1:.2e}, {elapsed:.2} s", s.value(), s.mu0),
    ))
}

fn lemma_chain(r: &RunReport, seconds: f64) -> Outcome {
    let rows = &r.convergence.rows;
    let below = rows.iter().all(|row| row.energy <= row.meanfield_energy + 1e-8);
    let gaps: Vec<f64> = rows.iter().map(|row| row.meanfield_energy - row.energy).collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    outcome(
        below && shrinking && rows.len() == 3 && seconds < 300.0,
        format!("gaps {} for N = 2, 3, 4; pipeline {seconds:.1} s", list(&gaps)),
    )
}

fn product_exactness(res: &mut Residuals) -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (n, m, extent) in [(2usize, 257usize, 8.0), (3, 101, 7.0)] {
        let axis = UniformGrid::<f64>::symmetric_line(extent, m)?;
        let interacting = MeanFieldPotential::from_profiles(
            &axis,
            &TrapPolynomial::HARMONIC,
            &Kernel::Zero,
            &Kernel::Gaussian { sigma: 1.0 },
            0.5,
        )?;
        let mf = solve_ground_state(&interacting, &MeanFieldSettings::default())?;
        let product = energy_n(&tensor_power(&mf.phi0, n)?, &interacting, n)?.total;
        let product_err = (product - mf.energy).abs();

        let free = MeanFieldPotential::harmonic(&axis)?;
        let mf0 = solve_ground_state(&free, &MeanFieldSettings::default())?;
        let st0 = solve_linear_ground_state(&free, n, &NParticleSettings::default())?;
        res.push(format!("free N={n}"), st0.residual_norm, st0.mu_n);
        let h = mvlab::diagnostics::entropy_per_particle(&st0, &mf0)?.direct;
        let mu_err = (st0.mu_n - n as f64 * mf0.mu0).abs();
        pass &= product_err <= 1e-8 && h.abs() <= 1e-6 && mu_err <= 5e-3;
        lines.push(format!("N={n}: product {product_err:.1e}, H/N {h:.1e}, mu_N-N*mu0 {mu_err:.1e}"));
    }
    Ok(outcome(pass, lines.join("; ")))
}

fn entropy_trend(r: &RunReport) -> Outcome {
    let h: Vec<f64> = r.convergence.rows.iter().map(|row| row.entropy_per_particle).collect();
    let agree = r
        .convergence
        .rows
        .iter()
        .map(|row| (row.entropy_per_particle - row.entropy_decomposition).abs())
        .fold(0.0, f64::max);
    outcome(
        h.windows(2).all(|w| w[1] < w[0]) && agree <= 1e-6,
        format!("H/N {}; dual-path gap {agree:.1e}", list(&h)),
    )
}

fn drift_identity(r: &RunReport) -> Result<Outcome> {
    let rows = &r.convergence.rows;
    let rel: Vec<f64> = rows
        .iter()
        .filter(|row| row.n <= 3)
        .map(|row| (row.drift_discrepancy - row.drift_discrepancy_formula).abs() / row.drift_discrepancy.abs())
        .collect();
    let d: Vec<f64> = rows.iter().map(|row| row.drift_discrepancy).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);

    let mut free_max: f64 = 0.0;
    for (n, m, extent) in [(2usize, 257usize, 8.0), (3, 101, 7.0)] {
        let axis = UniformGrid::<f64>::symmetric_line(extent, m)?;
        let free = MeanFieldPotential::harmonic(&axis)?;
        let mf = solve_ground_state(&free, &MeanFieldSettings::default())?;
        let st = solve_linear_ground_state(&free, n, &NParticleSettings::default())?;
        free_max = free_max.max(drift_discrepancy(&st, &mf, &free)?.direct.abs());
    }
    Ok(outcome(
        rel.iter().all(|&e| e <= 1e-6) && free_max <= 1e-10 && decreasing,
        format!("direct vs formula {}; D_N {}; g=0 max {free_max:.1e}", list(&rel), list(&d)),
    ))
}

fn inequality_suite(r: &RunReport) -> Result<Outcome> {
    let mut ck_ok = true;
    let mut w_ok = true;
    for row in &r.convergence.rows {
        ck_ok &= row.marginal_tv <= (2.0 * row.marginal_relative_entropy).sqrt() + 1e-8;
        w_ok &= row.marginal_w1 <= row.marginal_w2 + 1e-8;
    }
    let grid = UniformGrid::<f64>::symmetric_line(10.0, 1025)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut bound_ok = true;
    let mut min_slack = f64::INFINITY;
    for _ in 0..20 {
        let a = gaussian(&grid, rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.5));
        let b = gaussian(&grid, rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.5));
        let tv = tv_distance(&a, &b)?;
        let kl = relative_entropy(&a, &b)?;
        let w1 = wasserstein_1d(&a, &b, 1.0)?;
        let w2 = wasserstein_1d(&a, &b, 2.0)?;
        let bound = wasserstein_bound(&a, &b, 1.0, 2.0)?;
        ck_ok &= tv <= (2.0 * kl).sqrt() + 1e-8;
        w_ok &= w1 <= w2 + 1e-8;
        bound_ok &= bound >= w1;
        min_slack = min_slack.min(bound - w1);
    }
    Ok(outcome(
        ck_ok && w_ok && bound_ok,
        format!("Csiszar-Kullback {ck_ok}, W1<=W2 {w_ok}, bound dominates W1 on 20 pairs {bound_ok} (min slack {min_slack:.3})"),
    ))
}

fn fisher_structure() -> Result<Outcome> {
    let report = fisher_structure_tests(100, 8)?;
    let grid = UniformGrid::<f64>::symmetric_line(8.0, 1025)?;
    let i = fisher_information(&gaussian(&grid, 0.0, 1.0 / SQRT_2), false)?;
    Ok(outcome(
        report.pass() && report.instances >= 100 && (i - SQRT_2).abs() <= 1e-3,
        format!(
            "{} instances, min superadditivity gap {:.1e}, monotonicity excess {:.1e}, product error {:.1e}; Gaussian I = {i:.6}",
            report.instances, report.min_superadditivity_gap, report.max_monotonicity_excess, report.max_product_error
        ),
    ))
}

fn sde_ergodicity() -> Result<Outcome> {
    let base = "[grid]\nextent = 8.0\npoints = 1025\n[sde]\ndt = 0.001\nburn_in = 10.0\nbins = 64\nseed = 11\n";
    let long = run(&format!("{base}T = 200.0\nn_paths = 128\n"))?;
    let s = &long.sde_row(1).expect("mean-field simulation").stats;
    let cost_err = (s.cost - SQRT_2).abs() / SQRT_2;

    let short = format!("{base}T = 20.0\nn_paths = 8\n");
    let (a, b) = (run(&short)?, run(&short)?);
    let identical = convergence_csv(&a) == convergence_csv(&b)
        && serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
    Ok(outcome(
        cost_err <= 0.02 && s.tv <= 0.02 && s.samples >= 1_000_000 && identical,
        format!(
            "cost {:.5} ± {:.5} (rel err {cost_err:.2e}), TV {:.4}, {} samples, repeat identical {identical}",
            s.cost, s.standard_error, s.tv, s.samples
        ),
    ))
}

fn intermediate_scaling(res: &mut Residuals) -> Result<Outcome> {
    let kernel = Kernel::Bump { width: 2.5 };
    let scenario = ScalingScenario::new(vec![0.2, 0.5], vec![2, 3, 4], kernel, TrapPolynomial::HARMONIC)?;
    let axis = UniformGrid::<f64>::symmetric_line(5.33, 33)?;
    let report = scaling_sweep(&scenario, &axis, &ScalingSettings::default())?;
    let mut mass_err: f64 = 0.0;
    for c in &report.cells {
        mass_err = mass_err.max((c.kernel_mass - report.g_target).abs());
        res.push(format!("scaling beta={} N={}", c.beta, c.n), c.residual_norm, 2.0 * c.n as f64 * c.energy);
    }
    let trends = report.trends.iter().all(|t| t.energy_gap_decreasing && t.l1_gap_decreasing);
    let gaps: Vec<String> = report
        .cells
        .iter()
        .map(|c| format!("({}, {}) {:.2e}/{:.2e}", c.beta, c.n, c.energy_gap, c.marginal_l1_gap))
        .collect();
    Ok(outcome(
        trends && mass_err <= 1e-6 && kernel_mass(&Kernel::Bump { width: 2.5 })? > 0.0,
        format!("energy/L1 gaps {}; mass error {mass_err:.1e}", gaps.join(", ")),
    ))
}

fn validators() -> Result<Outcome> {
    let diff = UniformGrid::<f64>::symmetric_line(8.0, 257)?.difference_grid()?;
    let gauss = bochner_check(&Kernel::Gaussian { sigma: 1.0 }.sample(&diff)?)?.pass;
    // 129 nodes covering whole periods of cos(x)
    let h = 8.0 * PI / 129.0;
    let periodic = UniformGrid::<f64>::symmetric_line(64.0 * h, 129)?;
    let cosine = bochner_check(&Kernel::Cosine { k: 1.0 }.sample(&periodic)?)?.pass;
    let parabola = ScalarField::from_fn(diff, |x| (1.0 - x[0] * x[0]).max(0.0));
    let parabola = bochner_check(&parabola)?.pass;
    let r: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    let quartic = qv_check(&r, &r.iter().map(|x| x.powi(4)).collect::<Vec<_>>())?.pass;
    let quadratic = qv_check(&r, &r.iter().map(|x| x * x).collect::<Vec<_>>())?.pass;
    Ok(outcome(
        gauss && cosine && !parabola && quartic && !quadratic,
        format!("Bochner: gaussian {gauss}, cosine {cosine}, parabola {parabola}; QV: r^4 {quartic}, r^2 {quadratic}"),
    ))
}

fn record(results: &mut Vec<(usize, &'static str, Outcome)>, id: usize, name: &'static str, o: Result<Outcome>) {
    let o = o.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    results.push((id, name, o));
}

#[test]
fn acceptance_criteria() {
    let mut res = Residuals::default();
    let mut results = Vec::new();

    record(&mut results, 1, "harmonic oracle", harmonic_oracle(&mut res));

    let start = Instant::now();
    let interacting = run(INTERACTING);
    let seconds = start.elapsed().as_secs_f64();
    match &interacting {
        Ok(r) => {
            res.add_report("g=0.5", r);
            record(&mut results, 3, "energy chain", Ok(lemma_chain(r, seconds)));
            record(&mut results, 5, "entropy chaos trend", Ok(entropy_trend(r)));
            record(&mut results, 6, "drift discrepancy identity", drift_identity(r));
            record(&mut results, 7, "inequality suite", inequality_suite(r));
        }
        Err(e) => {
            for (id, name) in [
                (3, "energy chain"),
                (5, "entropy chaos trend"),
                (6, "drift discrepancy identity"),
                (7, "inequality suite"),
            ] {
                results.push((id, name, outcome(false, format!("pipeline error: {e}"))));
            }
        }
    }
    record(&mut results, 4, "product exactness", product_exactness(&mut res));
    record(&mut results, 8, "Fisher structure", fisher_structure());
    record(&mut results, 9, "SDE ergodicity", sde_ergodicity());
    record(&mut results, 10, "intermediate scaling", intermediate_scaling(&mut res));
    record(&mut results, 11, "validators", validators());

    let worst = res.0.iter().cloned().fold((String::new(), 0.0), |m, r| if r.1 > m.1 { r } else { m });
    results.push((
        2,
        "Euler-Lagrange residual",
        outcome(
            interacting.is_ok() && worst.1 <= 1e-5,
            format!("{} states, worst relative residual {:.1e} ({})", res.0.len(), worst.1, worst.0),
        ),
    ));

    results.sort_by_key(|r| r.0);
    // written past the test harness's capture so the lines show in plain runs
    let mut out = std::io::stdout().lock();
    for (id, name, o) in &results {
        let _ = writeln!(out, "{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    drop(out);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
