//! TOML scenario files: strict parsing (unknown keys are errors) and
//! validation of every section before any solve starts.
//!
//! ```toml
//! name = "interacting"
//! [grid]
//! extent = 8.0
//! points = 1025
//! [potential]
//! trap = "harmonic"          # or "poly(c0, c2, c4)"
//! v0 = "zero"
//! v1 = "gaussian(1.0)"       # kernels: zero, gaussian, cosine, bump, table(path); or "local"
//! g = 0.5
//! [nparticle]
//! N_list = [2, 3, 4]
//! points_per_axis = { 2 = 257, 3 = 101, 4 = 33 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::diagnostics::{PathEntropyConvention, RowSettings};
use crate::eigen::EigenSettings;
use crate::error::{Error, Result};
use crate::grid::{UniformGrid, MAX_DIMS};
use crate::meanfield::{InitialGuess, MeanFieldSettings};
use crate::nparticle::{max_points_per_axis, NParticleSettings};
use crate::potentials::{Kernel, MeanFieldPotential, TrapPolynomial};
use crate::scaling::{ScalingScenario, ScalingSettings};
use crate::sde::{Initial, SimConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    grid: RawGrid,
    #[serde(default)]
    potential: RawPotential,
    #[serde(default)]
    meanfield: RawMeanField,
    #[serde(default)]
    nparticle: RawNParticle,
    sde: Option<RawSde>,
    scaling: Option<RawScaling>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    extent: f64,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPotential {
    trap: String,
    v0: String,
    v1: String,
    g: f64,
}

impl Default for RawPotential {
    fn default() -> Self {
        Self {
            trap: "harmonic".into(),
            v0: "zero".into(),
            v1: "zero".into(),
            g: 0.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeanField {
    tol: Option<f64>,
    max_outer: Option<usize>,
    mixing: Option<f64>,
    init: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNParticle {
    #[serde(rename = "N_list", default)]
    n_list: Vec<usize>,
    #[serde(default)]
    points_per_axis: BTreeMap<String, usize>,
    #[serde(default)]
    extent: BTreeMap<String, f64>,
    #[serde(rename = "tol_N")]
    tol_n: Option<f64>,
    max_iter: Option<usize>,
    max_nodes: Option<usize>,
    horizon: Option<f64>,
    girsanov_constant: Option<f64>,
    initial_sign: Option<f64>,
    moment_order: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSde {
    dt: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    burn_in: Option<f64>,
    n_paths: Option<usize>,
    seed: Option<u64>,
    bins: Option<usize>,
    initial: Option<toml::Value>,
    #[serde(default)]
    nparticle: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScaling {
    beta_list: Vec<f64>,
    #[serde(rename = "N_list")]
    n_list: Vec<usize>,
    kernel: String,
    #[serde(default = "default_scaling_points")]
    points: usize,
    #[serde(default = "default_scaling_extent")]
    extent: f64,
}

fn default_scaling_points() -> usize {
    31
}

fn default_scaling_extent() -> f64 {
    5.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    #[serde(default = "default_formats")]
    formats: Vec<String>,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

/// Interaction of the scenario's mean-field potential.
#[derive(Clone, Debug, PartialEq)]
pub enum InteractionSpec {
    Kernel(Kernel),
    Local,
}

#[derive(Clone, Debug)]
pub struct NParticleSpec {
    /// Particle count with its axis grid.
    pub axes: Vec<(usize, UniformGrid<f64>)>,
    pub settings: NParticleSettings,
    pub row: RowSettings,
}

#[derive(Clone, Debug)]
pub struct SdeSpec {
    pub config: SimConfig,
    /// Also simulate every N-particle system.
    pub nparticle: bool,
}

#[derive(Clone, Debug)]
pub struct ScalingSpec {
    pub scenario: ScalingScenario,
    pub axis: UniformGrid<f64>,
    pub settings: ScalingSettings,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    pub csv: bool,
    pub json: bool,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub grid: UniformGrid<f64>,
    pub trap: TrapPolynomial,
    pub v0: Kernel,
    pub interaction: InteractionSpec,
    pub g: f64,
    pub meanfield: MeanFieldSettings,
    pub nparticle: NParticleSpec,
    pub sde: Option<SdeSpec>,
    pub scaling: Option<ScalingSpec>,
    pub output: OutputSpec,
    /// Scenario text as read, hashed into the run manifest.
    pub source: String,
}

impl Scenario {
    /// The scenario's mean-field potential sampled on a 1D grid.
    pub fn potential_on(&self, axis: &UniformGrid<f64>) -> Result<MeanFieldPotential<f64>> {
        match &self.interaction {
            InteractionSpec::Kernel(v1) => MeanFieldPotential::from_profiles(axis, &self.trap, &self.v0, v1, self.g),
            InteractionSpec::Local => {
                MeanFieldPotential::local(self.trap.sample(axis), self.v0.sample(axis)?, self.g)
            }
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Lines holding `key = …` within the same table header.
fn duplicate_lines(text: &str, key: &str) -> Option<(usize, usize)> {
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            table = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim().trim_matches('"').to_string();
        if k != key {
            continue;
        }
        if let Some(&first) = seen.get(&(table.clone(), k.clone())) {
            return Some((first, i + 1));
        }
        seen.insert((table.clone(), k), i + 1);
    }
    None
}

fn syntax_error(text: &str, e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    if let Some(rest) = message.strip_prefix("duplicate key `") {
        let key = rest.split('`').next().unwrap_or("");
        if let Some((a, b)) = duplicate_lines(text, key) {
            return Error::Scenario(format!("duplicate key `{key}` at lines {a} and {b}"));
        }
    }
    match e.span() {
        Some(span) => Error::Scenario(format!("line {}: {message}", line_of(text, span.start))),
        None => Error::Scenario(message),
    }
}

fn rule(section: &str, message: impl std::fmt::Display) -> Error {
    Error::Scenario(format!("[{section}] {message}"))
}

fn parse_trap(text: &str) -> Result<TrapPolynomial> {
    let t = text.trim();
    if t == "harmonic" {
        return Ok(TrapPolynomial::HARMONIC);
    }
    let inner = t
        .strip_prefix("poly(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| rule("potential", format!("trap `{t}`: expected harmonic or poly(c0, c2, c4)")))?;
    let c: Vec<f64> = inner
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| rule("potential", format!("trap `{t}`: coefficients must be numbers")))?;
    if c.len() != 3 {
        return Err(rule("potential", format!("trap `{t}` needs three coefficients")));
    }
    TrapPolynomial::new(c[0], c[1], c[2]).map_err(|e| rule("potential", e))
}

fn default_axis(n: usize) -> (usize, f64) {
    match n {
        2 => (257, 8.0),
        3 => (101, 7.0),
        _ => (33, 6.0),
    }
}

/// Parses and validates scenario text; relative table paths resolve against
/// `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| syntax_error(text, e))?;

    let g = &raw.grid;
    if !(g.extent > 0.0 && g.extent.is_finite()) {
        return Err(rule("grid", format!("extent = {} must be positive", g.extent)));
    }
    let grid = UniformGrid::symmetric_line(g.extent, g.points).map_err(|e| rule("grid", e))?;

    let p = &raw.potential;
    let trap = parse_trap(&p.trap)?;
    let v0 = Kernel::parse(&p.v0, base_dir).map_err(|e| rule("potential", format!("v0: {e}")))?;
    let interaction = if p.v1.trim() == "local" {
        InteractionSpec::Local
    } else {
        InteractionSpec::Kernel(Kernel::parse(&p.v1, base_dir).map_err(|e| rule("potential", format!("v1: {e}")))?)
    };
    if !(p.g >= 0.0 && p.g.is_finite()) {
        return Err(rule("potential", format!("g = {} must be finite and nonnegative", p.g)));
    }

    let m = &raw.meanfield;
    let mut meanfield = MeanFieldSettings::default();
    if let Some(t) = m.tol {
        if !(t > 0.0) {
            return Err(rule("meanfield", format!("tol = {t} must be positive")));
        }
        meanfield.tol = t;
    }
    if let Some(k) = m.max_outer {
        meanfield.max_outer = k;
    }
    if let Some(x) = m.mixing {
        if !(x > 0.0 && x <= 1.0) {
            return Err(rule("meanfield", format!("mixing = {x} must lie in (0, 1]")));
        }
        meanfield.mixing = x;
    }
    if let Some(init) = &m.init {
        meanfield.init = match init.as_str() {
            "gaussian" => InitialGuess::Gaussian,
            "uniform" => InitialGuess::Uniform,
            other => return Err(rule("meanfield", format!("init `{other}`: expected gaussian or uniform"))),
        };
    }

    let np = &raw.nparticle;
    let mut settings = NParticleSettings::default();
    if let Some(t) = np.tol_n {
        if !(t > 0.0) {
            return Err(rule("nparticle", format!("tol_N = {t} must be positive")));
        }
        settings.eigen = EigenSettings { tol: t, ..settings.eigen };
    }
    if let Some(k) = np.max_iter {
        settings.eigen.max_iter = k;
    }
    if let Some(b) = np.max_nodes {
        settings.max_nodes = b;
    }
    for key in np.points_per_axis.keys().chain(np.extent.keys()) {
        if !key.parse::<usize>().is_ok_and(|n| np.n_list.contains(&n)) {
            return Err(rule("nparticle", format!("per-N entry `{key}` does not name a member of N_list")));
        }
    }
    let mut axes = Vec::new();
    for &n in &np.n_list {
        if !(2..=MAX_DIMS).contains(&n) {
            return Err(rule("nparticle", format!("N = {n} violates 2 ≤ N ≤ {MAX_DIMS}")));
        }
        if interaction == InteractionSpec::Local {
            return Err(rule("nparticle", "N-particle problems need a kernel v1, not `local`"));
        }
        let (dm, de) = default_axis(n);
        let points = np.points_per_axis.get(&n.to_string()).copied().unwrap_or(dm);
        let extent = np.extent.get(&n.to_string()).copied().unwrap_or(de);
        if points.checked_pow(n as u32).is_none_or(|len| len > settings.max_nodes) {
            return Err(rule(
                "nparticle",
                format!(
                    "{points}^{n} nodes exceed max_nodes = {}; use at most {} points per axis",
                    settings.max_nodes,
                    max_points_per_axis(n, settings.max_nodes)
                ),
            ));
        }
        let axis = UniformGrid::symmetric_line(extent, points).map_err(|e| rule("nparticle", e))?;
        axes.push((n, axis));
    }
    let mut row = RowSettings::default();
    if let Some(t) = np.horizon {
        if !(t > 0.0) {
            return Err(rule("nparticle", format!("horizon = {t} must be positive")));
        }
        row.horizon = t;
    }
    let constant = np.girsanov_constant.unwrap_or(row.convention.constant);
    let sign = np.initial_sign.unwrap_or(row.convention.initial_sign);
    row.convention = PathEntropyConvention::new(constant, sign).map_err(|e| rule("nparticle", e))?;
    if let Some(k) = np.moment_order {
        if !(k > 0.0) {
            return Err(rule("nparticle", format!("moment_order = {k} must be positive")));
        }
        row.moment_order = k;
    }

    let sde = match &raw.sde {
        None => None,
        Some(s) => {
            let d = SimConfig::default();
            let initial = match &s.initial {
                None => d.initial.clone(),
                Some(toml::Value::String(t)) if t == "density" => Initial::Density,
                Some(toml::Value::Array(a)) => Initial::Point(
                    a.iter()
                        .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| rule("sde", "initial point must be a list of numbers"))?,
                ),
                Some(_) => return Err(rule("sde", "initial must be \"density\" or a list of coordinates")),
            };
            if let Initial::Point(p) = &initial {
                if p.len() != 1 || s.nparticle {
                    return Err(rule(
                        "sde",
                        "a point initial condition is one coordinate and excludes nparticle = true",
                    ));
                }
            }
            let config = SimConfig {
                dt: s.dt.unwrap_or(d.dt),
                horizon: s.horizon.unwrap_or(d.horizon),
                burn_in: s.burn_in.unwrap_or(d.burn_in),
                n_paths: s.n_paths.unwrap_or(d.n_paths),
                seed: s.seed.unwrap_or(d.seed),
                initial,
                bins: s.bins.unwrap_or(d.bins),
            };
            config.validate(2.0 * raw.grid.extent).map_err(|e| rule("sde", e))?;
            Some(SdeSpec {
                config,
                nparticle: s.nparticle,
            })
        }
    };

    let scaling = match &raw.scaling {
        None => None,
        Some(s) => {
            let kernel = Kernel::parse(&s.kernel, base_dir).map_err(|e| rule("scaling", e))?;
            let sc = ScalingScenario::new(s.beta_list.clone(), s.n_list.clone(), kernel, trap)
                .map_err(|e| rule("scaling", e))?;
            let axis = UniformGrid::symmetric_line(s.extent, s.points).map_err(|e| rule("scaling", e))?;
            let top = s.n_list.iter().copied().max().unwrap_or(2);
            if s.points.checked_pow(top as u32).is_none_or(|len| len > settings.max_nodes) {
                return Err(rule(
                    "scaling",
                    format!(
                        "{}^{top} nodes exceed max_nodes = {}; use at most {} points",
                        s.points,
                        settings.max_nodes,
                        max_points_per_axis(top, settings.max_nodes)
                    ),
                ));
            }
            Some(ScalingSpec {
                scenario: sc,
                axis,
                settings: ScalingSettings {
                    meanfield: meanfield.clone(),
                    nparticle: settings.clone(),
                },
            })
        }
    };

    let mut output = OutputSpec {
        directory: raw.output.directory.as_ref().map(PathBuf::from),
        csv: false,
        json: false,
    };
    for f in &raw.output.formats {
        match f.as_str() {
            "csv" => output.csv = true,
            "json" => output.json = true,
            other => return Err(rule("output", format!("format `{other}`: expected csv or json"))),
        }
    }

    let scenario = Scenario {
        name: raw.name.clone().unwrap_or_else(|| "scenario".into()),
        grid,
        trap,
        v0,
        interaction,
        g: p.g,
        meanfield,
        nparticle: NParticleSpec { axes, settings, row },
        sde,
        scaling,
        output,
        source: text.to_string(),
    };
    // construct the potential once so profile errors surface here
    scenario.potential_on(&scenario.grid).map_err(|e| rule("potential", e))?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}
