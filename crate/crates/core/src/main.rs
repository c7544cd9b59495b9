use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mvlab::report::emit_report;
use mvlab::runner::run_experiment;
use mvlab::scenario::load_scenario;
use mvlab::Error;

const DEFAULT_OUT_DIR: &str = "mvlab_out";

#[derive(Parser)]
#[command(name = "mvlab", version, about = "Mean-field control and N-particle ground-state experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its reports.
    Run {
        scenario: PathBuf,
        /// Output directory; overrides the scenario's `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the SDE stage; overrides `sde.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory used when neither --out nor the scenario sets one.
        #[arg(long, env = "MVLAB_OUT_DIR", hide = true)]
        default_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        scenario: path,
        out,
        seed,
        threads,
        default_out,
    } = Cli::parse().command;

    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot start {k} threads: {e}");
            return ExitCode::from(3);
        }
    }

    let mut scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let (Some(seed), Some(sde)) = (seed, scenario.sde.as_mut()) {
        sde.config.seed = seed;
    }
    let dir = out
        .or_else(|| scenario.output.directory.clone())
        .or(default_out)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let report = match run_experiment(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if matches!(e.root(), Error::Scenario(_)) { 2 } else { 3 };
            return ExitCode::from(code);
        }
    };
    if report.uniqueness_warning {
        eprintln!("warning: v1 fails the positive-definiteness check; the ground state may not be unique");
    }
    let used_seed = scenario.sde.as_ref().map(|s| s.config.seed);
    match emit_report(&report, &scenario.output, &dir, &scenario.source, used_seed, rayon::current_num_threads()) {
        Ok(files) => {
            let r = &report.convergence.reference;
            println!("mean-field value {} (mu0 {})", r.value, r.mu0);
            for row in &report.convergence.rows {
                println!(
                    "N = {}: E_N {} entropy/particle {} drift discrepancy {}",
                    row.n, row.energy, row.entropy_per_particle, row.drift_discrepancy
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
