//! The experiment pipeline: validate the potential, solve the mean-field
//! problem, solve and diagnose each N, then the optional simulation and
//! scaling stages. Errors carry the stage they came from.

use crate::diagnostics::{convergence_row, ConvergenceReport, MeanFieldRow};
use crate::error::Result;
use crate::meanfield::{solve_ground_state, tail_bound_check};
use crate::nparticle::solve_linear_ground_state;
use crate::potentials::HypothesisReport;
use crate::report::{RunReport, SdeRow};
use crate::scaling::scaling_sweep;
use crate::scenario::Scenario;
use crate::sde::{simulate_meanfield_state, simulate_nparticle_state};

pub fn run_experiment(scenario: &Scenario) -> Result<RunReport> {
    let potential = scenario.potential_on(&scenario.grid).map_err(|e| e.at_stage("validate"))?;
    let (bochner, qv) = potential.validate().map_err(|e| e.at_stage("validate"))?;
    let hypotheses = HypothesisReport::new(&bochner, &qv);

    let mf = solve_ground_state(&potential, &scenario.meanfield).map_err(|e| e.at_stage("meanfield"))?;
    let tail_bounds = tail_bound_check(&mf, &potential).map_err(|e| e.at_stage("meanfield"))?;

    let mut rows = Vec::new();
    let mut states = Vec::new();
    for (n, axis) in &scenario.nparticle.axes {
        let stage = |e: crate::Error| e.at_stage("nparticle");
        let pot_n = scenario.potential_on(axis).map_err(stage)?;
        let mf_n = solve_ground_state(&pot_n, &scenario.meanfield).map_err(stage)?;
        let state = solve_linear_ground_state(&pot_n, *n, &scenario.nparticle.settings).map_err(stage)?;
        rows.push(convergence_row(&state, &mf_n, &pot_n, &scenario.nparticle.row).map_err(stage)?);
        states.push((state, pot_n));
    }

    let mut sde = Vec::new();
    if let Some(spec) = &scenario.sde {
        let stage = |e: crate::Error| e.at_stage("sde");
        let stats = simulate_meanfield_state(&mf, &potential, &spec.config).map_err(stage)?;
        sde.push(SdeRow {
            n: 1,
            reference_value: mf.value(),
            stats,
        });
        if spec.nparticle {
            for (state, pot_n) in &states {
                let stats = simulate_nparticle_state(state, pot_n, &spec.config).map_err(stage)?;
                sde.push(SdeRow {
                    n: state.n,
                    reference_value: state.value(),
                    stats,
                });
            }
        }
    }

    let scaling = match &scenario.scaling {
        Some(s) => Some(scaling_sweep(&s.scenario, &s.axis, &s.settings).map_err(|e| e.at_stage("scaling"))?),
        None => None,
    };

    Ok(RunReport {
        name: scenario.name.clone(),
        convergence: ConvergenceReport::new(MeanFieldRow::new(&mf), rows),
        uniqueness_warning: mf.uniqueness_warning || !bochner.pass,
        hypotheses,
        tail_bounds,
        points_per_axis: scenario.grid.points(0),
        sde,
        scaling,
    })
}
