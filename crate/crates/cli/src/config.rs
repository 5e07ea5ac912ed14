//! Scenario files (TOML or JSON) and their validation.

use crate::CliError;
use frontlab::fbsolver::{InitialData, SimulationConfig};
use frontlab::kernels::{Kernel, KernelSpec};
use frontlab::lattice::ConvolutionPath;
use frontlab::reaction::{ReactionModel, ReactionSystem};
use frontlab::semiwave::SemiWaveConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub reaction: ReactionModel,
    /// Diffusion rates; the preset's defaults when omitted.
    #[serde(default)]
    pub d: Option<Vec<f64>>,
    /// Front coefficients; the preset's defaults when omitted.
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    /// One kernel per diffusing species, or a single shared kernel.
    pub kernels: Vec<KernelSpec>,
    #[serde(default)]
    pub semiwave: SemiWaveSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    /// Overrides `--out-dir`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemiWaveSection {
    pub length: f64,
    pub dx: f64,
    pub tol: f64,
    pub tol_c: f64,
    pub max_iterations: usize,
    /// Speeds scanned for the threshold bracket; empty skips the scan.
    pub c_grid: Vec<f64>,
}

impl Default for SemiWaveSection {
    fn default() -> Self {
        let d = SemiWaveConfig::default();
        SemiWaveSection { length: d.length, dx: d.dx, tol: d.tol, tol_c: 1e-4, max_iterations: d.max_iterations, c_grid: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub h0: f64,
    pub u0: InitialData,
    pub dx: f64,
    pub cfl_factor: f64,
    pub t_final: f64,
    pub sample_dt: f64,
    pub snapshot_times: Vec<f64>,
    pub max_wall_seconds: Option<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimulationConfig::default();
        SimulationSection {
            h0: d.h0,
            u0: d.u0,
            dx: d.dx,
            cfl_factor: d.cfl_factor,
            t_final: d.t_final,
            sample_dt: d.sample_dt,
            snapshot_times: d.snapshot_times,
            max_wall_seconds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub window_fraction: f64,
    /// Kernel exponent used to label the lag fit; read from the kernel when omitted.
    pub gamma_hint: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { window_fraction: frontlab::asymptotics::DEFAULT_FRACTION, gamma_hint: None }
    }
}

/// A validated scenario with its core objects built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub system: ReactionSystem,
    pub kernels: Vec<Kernel>,
}

impl Scenario {
    pub fn semiwave_config(&self) -> SemiWaveConfig {
        let s = &self.config.semiwave;
        SemiWaveConfig { length: s.length, dx: s.dx, tol: s.tol, max_iterations: s.max_iterations, path: ConvolutionPath::Auto }
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        let s = &self.config.simulation;
        SimulationConfig {
            h0: s.h0,
            u0: s.u0,
            dx: s.dx,
            cfl_factor: s.cfl_factor,
            t_final: s.t_final,
            sample_dt: s.sample_dt,
            snapshot_times: s.snapshot_times.clone(),
            shift_cells: 0,
            path: ConvolutionPath::Auto,
            max_wall_seconds: s.max_wall_seconds,
        }
    }

    /// Exponent of the first algebraic kernel, unless overridden.
    pub fn gamma_hint(&self) -> Option<f64> {
        self.config.analysis.gamma_hint.or_else(|| self.kernels.iter().find_map(|k| k.classify().gamma_tag))
    }

    /// Whether every kernel that drives a front has a finite first moment.
    pub fn fronts_have_first_moment(&self) -> bool {
        self.front_kernels().all(|k| k.classify().satisfies_j1)
    }

    pub fn front_kernels(&self) -> impl Iterator<Item = &Kernel> {
        let shared = self.kernels.len() == 1;
        self.system
            .mu
            .iter()
            .enumerate()
            .filter(|(_, &mu)| mu > 0.0)
            .map(move |(i, _)| if shared { &self.kernels[0] } else { &self.kernels[i] })
    }
}

/// Parses a TOML or JSON scenario; error messages carry the schema path.
pub fn parse_scenario(text: &str, format: Format) -> Result<ScenarioConfig, CliError> {
    let located = |path: String, msg: String| CliError::Validation(format!("config.{path}: {msg}"));
    match format {
        Format::Toml => {
            let value: toml::Table = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
            serde_path_to_error::deserialize(toml::Value::Table(value))
                .map_err(|e| located(e.path().to_string(), e.inner().to_string()))
        }
        Format::Json => {
            let mut de = serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(&mut de).map_err(|e| located(e.path().to_string(), e.inner().to_string()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let config = parse_scenario(&text, Format::from_path(path))?;
    build_scenario(config)
}

/// Resolves a preset name to `configs/<name>.toml`, looking in the working
/// directory first and then in the source tree.
pub fn preset_path(name: &str) -> Result<PathBuf, CliError> {
    let file = format!("{name}.toml");
    let candidates =
        [PathBuf::from("configs").join(&file), Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(&file)];
    candidates
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| CliError::Validation(format!("unknown preset {name:?} (no configs/{file})")))
}

pub fn build_scenario(config: ScenarioConfig) -> Result<Scenario, CliError> {
    let invalid = |path: &str, msg: String| CliError::Validation(format!("config.{path}: {msg}"));
    let (d_default, mu_default) = config.reaction.default_rates();
    let d = config.d.clone().unwrap_or(d_default);
    let mu = config.mu.clone().unwrap_or(mu_default);
    let system = ReactionSystem::new(config.reaction.clone(), d, mu).map_err(|e| invalid("reaction", e.to_string()))?;
    if config.kernels.is_empty() {
        return Err(invalid("kernels", "at least one kernel is required".into()));
    }
    if config.kernels.len() != 1 && config.kernels.len() != system.m0 {
        return Err(invalid(
            "kernels",
            format!("expected 1 or {} kernels (one per diffusing species), got {}", system.m0, config.kernels.len()),
        ));
    }
    let kernels = config
        .kernels
        .iter()
        .enumerate()
        .map(|(i, spec)| Kernel::from_spec(spec).map_err(|e| invalid(&format!("kernels[{i}]"), e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let sw = &config.semiwave;
    for (name, v) in [("semiwave.length", sw.length), ("semiwave.dx", sw.dx), ("semiwave.tol", sw.tol), ("semiwave.tol_c", sw.tol_c)] {
        positive(name, v)?;
    }
    if sw.c_grid.iter().any(|&c| !(c > 0.0)) || sw.c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("semiwave.c_grid", "speeds must be positive and increasing".into()));
    }
    let sim = &config.simulation;
    for (name, v) in [
        ("simulation.h0", sim.h0),
        ("simulation.dx", sim.dx),
        ("simulation.cfl_factor", sim.cfl_factor),
        ("simulation.sample_dt", sim.sample_dt),
        ("simulation.u0.amplitude", sim.u0.amplitude),
    ] {
        positive(name, v)?;
    }
    if !(sim.t_final >= 0.0) {
        return Err(invalid("simulation.t_final", format!("must be nonnegative, got {}", sim.t_final)));
    }
    if sim.cfl_factor > 1.0 {
        return Err(invalid("simulation.cfl_factor", format!("must not exceed 1, got {}", sim.cfl_factor)));
    }
    let frac = config.analysis.window_fraction;
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(invalid("analysis.window_fraction", format!("must lie in (0, 1], got {frac}")));
    }
    Ok(Scenario { config, system, kernels })
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("config.{name}: must be positive, got {v}")))
    }
}
