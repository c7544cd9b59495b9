//! Report assembly and the files written for a run: the convergence table as
//! CSV and JSON, SDE histograms, the scaling table and a run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{ConvergenceReport, ConvergenceRow};
use crate::error::{Error, Result};
use crate::meanfield::TailBoundReport;
use crate::potentials::HypothesisReport;
use crate::scaling::ScalingReport;
use crate::scenario::OutputSpec;
use crate::sde::TrajectoryStats;

pub const REPORT_VERSION: u32 = 1;

/// Convergence table columns, in file order.
pub const CSV_COLUMNS: [&str; 26] = [
    "row",
    "N",
    "E_N",
    "E_KN",
    "E_PN",
    "mu_N",
    "entropy_per_particle",
    "marginal_L1_gap",
    "marginal_TV",
    "marginal_W1",
    "marginal_W2",
    "drift_discrepancy",
    "path_entropy",
    "moment_Mk",
    "H1",
    "mu_N_per_particle_form",
    "meanfield_energy",
    "entropy_decomposition",
    "marginal_KL",
    "drift_discrepancy_formula",
    "drift_discrepancy_pointwise",
    "residual_norm",
    "points_per_axis",
    "sde_cost",
    "sde_cost_se",
    "sde_tv",
];

/// Simulation of one system; `n = 1` is the mean-field dynamics.
#[derive(Clone, Debug, Serialize)]
pub struct SdeRow {
    pub n: usize,
    /// Ground-state energy the cost estimate should reproduce.
    pub reference_value: f64,
    #[serde(flatten)]
    pub stats: TrajectoryStats,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    #[serde(flatten)]
    pub convergence: ConvergenceReport,
    pub uniqueness_warning: bool,
    pub hypotheses: HypothesisReport,
    pub tail_bounds: TailBoundReport,
    pub points_per_axis: usize,
    pub sde: Vec<SdeRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingReport>,
}

impl RunReport {
    pub fn sde_row(&self, n: usize) -> Option<&SdeRow> {
        self.sde.iter().find(|r| r.n == n)
    }
}

fn cell(v: f64) -> String {
    format!("{v}")
}

fn push_sde(cells: &mut Vec<String>, row: Option<&SdeRow>) {
    match row {
        Some(r) => {
            cells.push(cell(r.stats.cost));
            cells.push(cell(r.stats.standard_error));
            cells.push(cell(r.stats.tv));
        }
        None => cells.extend(std::iter::repeat_n(String::new(), 3)),
    }
}

fn row_cells(r: &ConvergenceRow, sde: Option<&SdeRow>) -> Vec<String> {
    let mut c = vec!["nparticle".to_string(), r.n.to_string()];
    c.extend(
        [
            r.energy,
            r.kinetic,
            r.potential,
            r.mu_n,
            r.entropy_per_particle,
            r.marginal_l1_gap,
            r.marginal_tv,
            r.marginal_w1,
            r.marginal_w2,
            r.drift_discrepancy,
            r.path_entropy,
            r.moment,
        ]
        .map(cell),
    );
    c.push(String::new());
    c.extend(
        [
            r.mu_per_particle_form,
            r.meanfield_energy,
            r.entropy_decomposition,
            r.marginal_relative_entropy,
            r.drift_discrepancy_formula,
            r.drift_discrepancy_pointwise,
            r.residual_norm,
        ]
        .map(cell),
    );
    c.push(r.points_per_axis.to_string());
    push_sde(&mut c, sde);
    c
}

/// Convergence table: the mean-field row first, then one row per N.
/// Columns that do not apply to a row are left empty.
pub fn convergence_csv(report: &RunReport) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    let m = &report.convergence.reference;
    let mut c = vec!["meanfield".to_string(), String::new()];
    c.extend([m.value, m.kinetic, m.potential, m.mu0].map(cell));
    c.extend(std::iter::repeat_n(String::new(), 8));
    c.push(cell(m.entropy));
    c.extend(std::iter::repeat_n(String::new(), 6));
    c.push(cell(m.residual_norm));
    c.push(report.points_per_axis.to_string());
    push_sde(&mut c, report.sde_row(1));
    out.push_str(&c.join(","));
    out.push('\n');
    for r in &report.convergence.rows {
        out.push_str(&row_cells(r, report.sde_row(r.n)).join(","));
        out.push('\n');
    }
    out
}

pub fn histogram_csv(row: &SdeRow) -> String {
    let s = &row.stats;
    let bins = s.counts.len();
    let width = (s.upper - s.lower) / bins as f64;
    let mut out = String::from("bin_lower,bin_upper,count,density\n");
    for (b, &count) in s.counts.iter().enumerate() {
        let lo = s.lower + b as f64 * width;
        let density = count as f64 / (s.samples as f64 * width);
        let _ = writeln!(out, "{},{},{},{}", lo, lo + width, count, density);
    }
    out
}

pub fn scaling_csv(report: &ScalingReport) -> String {
    let mut out = String::from("beta,N,energy,energy_gap,marginal_L1_gap,kernel_mass,kernel_width,residual_norm\n");
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.beta, c.n, c.energy, c.energy_gap, c.marginal_l1_gap, c.kernel_mass, c.kernel_width, c.residual_norm
        );
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub report_version: u32,
    pub scenario_sha256: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub files: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(name.to_string());
    Ok(())
}

/// Writes the requested formats into `dir` and returns the written paths,
/// the manifest last.
pub fn emit_report(
    report: &RunReport,
    output: &OutputSpec,
    dir: &Path,
    scenario_text: &str,
    seed: Option<u64>,
    threads: usize,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    if output.csv {
        write(dir, "convergence.csv", &convergence_csv(report), &mut files)?;
        for row in &report.sde {
            let name = match row.n {
                1 => "histogram_meanfield.csv".to_string(),
                n => format!("histogram_N{n}.csv"),
            };
            write(dir, &name, &histogram_csv(row), &mut files)?;
        }
        if let Some(s) = &report.scaling {
            write(dir, "scaling.csv", &scaling_csv(s), &mut files)?;
        }
    }
    if output.json {
        let mut json = serde_json::to_string_pretty(report).map_err(|e| Error::Consistency(e.to_string()))?;
        json.push('\n');
        write(dir, "report.json", &json, &mut files)?;
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        report_version: REPORT_VERSION,
        scenario_sha256: sha256_hex(scenario_text),
        seed,
        threads,
        files: files.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Consistency(e.to_string()))?;
    json.push('\n');
    write(dir, "run_manifest.json", &json, &mut files)?;
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_text() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn column_names_are_unique() {
        let mut c = CSV_COLUMNS.to_vec();
        c.sort();
        c.dedup();
        assert_eq!(c.len(), CSV_COLUMNS.len());
    }
}
