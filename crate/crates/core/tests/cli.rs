//! End-to-end runs of the `mvlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const HARMONIC: &str = "[grid]\nextent = 8.0\npoints = 513\n";

fn mvlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mvlab"));
    c.env_remove("MVLAB_OUT_DIR");
    c
}

fn scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(path: &Path, out: &Path, extra: &[&str]) -> Output {
    mvlab().arg("run").arg(path).arg("--out").arg(out).args(extra).output().unwrap()
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let text = format!(
        "{HARMONIC}[potential]\nv1 = \"gaussian(1.0)\"\ng = 0.5\n[nparticle]\nN_list = [2]\npoints_per_axis = {{ 2 = 97 }}\n\
         [sde]\nT = 5.0\nburn_in = 1.0\nn_paths = 4\nbins = 32\nnparticle = true\n"
    );
    let path = scenario(tmp.path(), "s.toml", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&path, &a, &["--seed", "5"]).status.success());
    assert!(run(&path, &b, &["--seed", "5", "--threads", "1"]).status.success());
    for f in ["convergence.csv", "report.json", "histogram_meanfield.csv", "histogram_N2.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let manifest: Value = serde_json::from_str(&read(a.join("run_manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["report_version"], 1);
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["scenario_sha256"].as_str().unwrap().len(), 64);

    let c = tmp.path().join("c");
    assert!(run(&path, &c, &["--seed", "6"]).status.success());
    assert_ne!(read(a.join("histogram_meanfield.csv")), read(c.join("histogram_meanfield.csv")));
}

#[test]
fn csv_and_json_agree_to_full_precision() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{HARMONIC}[nparticle]\nN_list = [2]\npoints_per_axis = {{ 2 = 97 }}\n");
    let path = scenario(tmp.path(), "s.toml", &text);
    let out = tmp.path().join("out");
    assert!(run(&path, &out, &[]).status.success());
    let json: Value = serde_json::from_str(&read(out.join("report.json"))).unwrap();
    assert_eq!(json["report_version"], 1);
    let csv = read(out.join("convergence.csv"));
    let lines: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(lines.len(), 3);
    let header = &lines[0];
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert!(lines.iter().all(|l| l.len() == header.len()));

    let meanfield: f64 = lines[1][col("E_N")].parse().unwrap();
    assert_eq!(meanfield, json["reference"]["value"].as_f64().unwrap());
    assert_eq!(lines[1][col("entropy_per_particle")], "");
    let row = &json["rows"][0];
    for (c, k) in [("E_N", "energy"), ("mu_N", "mu_n"), ("marginal_W2", "marginal_w2"), ("path_entropy", "path_entropy")] {
        let v: f64 = lines[2][col(c)].parse().unwrap();
        assert_eq!(v, row[k].as_f64().unwrap(), "{c}");
    }
}

#[test]
fn empty_particle_list_gives_only_the_meanfield_row() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "s.toml", HARMONIC);
    let out = tmp.path().join("out");
    let o = run(&path, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(out.join("convergence.csv"));
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("meanfield,,"));
    let json: Value = serde_json::from_str(&read(out.join("report.json"))).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 0);
    assert_eq!(json["uniqueness_warning"], false);
}

#[test]
fn scenario_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let beta = scenario(
        tmp.path(),
        "beta.toml",
        &format!("{HARMONIC}[scaling]\nbeta_list = [1.0]\nN_list = [2]\nkernel = \"bump(2.5)\"\n"),
    );
    let o = run(&beta, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("0 < beta < 1"), "{}", stderr(&o));

    let dup = scenario(tmp.path(), "dup.toml", "[grid]\nextent = 8.0\npoints = 129\npoints = 257\n");
    let o = run(&dup, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lines 3 and 4"), "{}", stderr(&o));

    let o = run(&tmp.path().join("missing.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn solver_failures_exit_with_three() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{HARMONIC}[potential]\nv1 = \"gaussian(1.0)\"\ng = 2.0\n[meanfield]\nmax_outer = 1\n");
    let path = scenario(tmp.path(), "s.toml", &text);
    let o = run(&path, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("meanfield"), "{}", stderr(&o));
}

#[test]
fn non_positive_definite_kernel_warns_and_completes() {
    let tmp = TempDir::new().unwrap();
    let rows: String = (0..=40)
        .map(|i| {
            let x = -1.0 + i as f64 * 0.05;
            format!("{x},{}\n", 1.0 - x * x)
        })
        .collect();
    std::fs::write(tmp.path().join("parabola.csv"), format!("x,v\n{rows}")).unwrap();
    let text = format!("{HARMONIC}[potential]\nv1 = \"table(parabola.csv)\"\ng = 0.3\n");
    let path = scenario(tmp.path(), "s.toml", &text);
    let out = tmp.path().join("out");
    // run from elsewhere so the table has to resolve against the scenario directory
    let o = mvlab().current_dir("/").arg("run").arg(&path).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let json: Value = serde_json::from_str(&read(out.join("report.json"))).unwrap();
    assert_eq!(json["uniqueness_warning"], true);
    assert_eq!(json["hypotheses"]["bochner_pass"], false);
}

#[test]
fn output_directory_precedence() {
    let tmp = TempDir::new().unwrap();
    let from_file = tmp.path().join("from_file");
    let from_env = tmp.path().join("from_env");
    let path = scenario(
        tmp.path(),
        "s.toml",
        &format!("{HARMONIC}[output]\ndirectory = \"{}\"\nformats = [\"csv\"]\n", from_file.display()),
    );
    let o = mvlab().arg("run").arg(&path).env("MVLAB_OUT_DIR", &from_env).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_file.join("convergence.csv").exists());
    assert!(!from_file.join("report.json").exists());
    assert!(!from_env.exists());

    let bare = scenario(tmp.path(), "bare.toml", HARMONIC);
    let o = mvlab().arg("run").arg(&bare).env("MVLAB_OUT_DIR", &from_env).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_env.join("report.json").exists());
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            mvlab::scenario::load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 3);
}
