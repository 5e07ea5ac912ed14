//! Scenario driver behind the `frontlab` binary.

pub mod config;
pub mod output;

use config::Scenario;
use frontlab::asymptotics::{self, AsymptoticsReport};
use frontlab::fbsolver::{self, classify_outcome, Outcome, OutcomeThresholds, Trajectory};
use frontlab::kernels::{ExtendedReal, Kernel, KernelConditionReport, KernelSpec};
use frontlab::reaction::{verify_assumptions, AssumptionReport};
use frontlab::semiwave::{self, CStarBracket, SemiWaveProfile, SemiWaveSolver, TailReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 0x5eed;
/// Jacobian samples drawn by the assumption checks.
pub const ASSUMPTION_SAMPLES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn numerical(op: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(format!("{op}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub spec: KernelSpec,
    pub conditions: KernelConditionReport,
    pub first_moment: ExtendedReal,
    pub characteristic_width: f64,
}

pub fn kernel_report(kernel: &Kernel) -> KernelReport {
    KernelReport {
        spec: kernel.spec(),
        conditions: kernel.classify(),
        first_moment: kernel.moment(1.0),
        characteristic_width: kernel.characteristic_width(),
    }
}

pub fn check_reaction(scenario: &Scenario, seed: u64) -> AssumptionReport {
    verify_assumptions(&scenario.system, ASSUMPTION_SAMPLES, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiWaveSummary {
    pub c: f64,
    pub regime: &'static str,
    pub shift_history: Vec<f64>,
    pub tail: Option<TailReport>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub converged_left: Option<bool>,
    pub length: f64,
    pub dx: f64,
}

/// Semi-wave at speed `c`.
pub fn semiwave_at(scenario: &Scenario, c: f64) -> Result<(SemiWaveSummary, Option<SemiWaveProfile>), CliError> {
    let mut solver = SemiWaveSolver::new(&scenario.system, &scenario.kernels, scenario.semiwave_config())
        .map_err(|e| CliError::Validation(format!("semiwave::solve_semiwave: {e}")))?;
    let result = solver.solve_semiwave(c).map_err(|e| numerical("semiwave::solve_semiwave", e))?;
    let profile = result.profile().cloned();
    let summary = SemiWaveSummary {
        c,
        regime: if result.is_semiwave() { "semi_wave" } else { "traveling_wave" },
        shift_history: result.shift_history.clone(),
        tail: profile.as_ref().map(semiwave::tail_report),
        iterations: profile.as_ref().map(|p| p.iterations),
        residual: profile.as_ref().map(|p| p.residual),
        converged_left: profile.as_ref().map(|p| p.converged_left),
        length: result.length,
        dx: scenario.config.semiwave.dx,
    };
    Ok((summary, profile))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedSummary {
    pub c0: f64,
    pub flux: f64,
    pub balance: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub semiwave: SemiWaveSummary,
    pub threshold: Option<CStarBracket>,
}

/// `c0` from the flux balance, plus the threshold bracket when a speed grid
/// is configured.
pub fn spreading_speed(scenario: &Scenario) -> Result<(SpeedSummary, SemiWaveProfile), CliError> {
    if !scenario.fronts_have_first_moment() {
        return Err(no_first_moment("semiwave::find_c0"));
    }
    let cfg = scenario.semiwave_config();
    let est = semiwave::find_c0(&scenario.system, &scenario.kernels, cfg, scenario.config.semiwave.tol_c)
        .map_err(|e| numerical("semiwave::find_c0", e))?;
    let profile = est
        .profile
        .clone()
        .ok_or_else(|| numerical("semiwave::find_c0", "no semi-wave at the returned speed"))?;
    let threshold = if scenario.config.semiwave.c_grid.is_empty() {
        None
    } else {
        Some(
            semiwave::bracket_cstar(&scenario.system, &scenario.kernels, cfg, &scenario.config.semiwave.c_grid)
                .map_err(|e| numerical("semiwave::bracket_cstar", e))?,
        )
    };
    let semiwave = SemiWaveSummary {
        c: est.c0,
        regime: "semi_wave",
        shift_history: Vec::new(),
        tail: Some(semiwave::tail_report(&profile)),
        iterations: Some(profile.iterations),
        residual: Some(profile.residual),
        converged_left: Some(profile.converged_left),
        length: profile.length,
        dx: profile.dx,
    };
    Ok((
        SpeedSummary {
            c0: est.c0,
            flux: est.flux,
            balance: est.c0 - est.flux,
            bracket: est.bracket,
            evaluations: est.evaluations,
            semiwave,
            threshold,
        },
        profile,
    ))
}

fn no_first_moment(op: &str) -> CliError {
    CliError::Validation(format!(
        "{op}: a front-driving kernel has no finite first moment, so the front flux diverges and there is no \
         finite spreading speed; run the scenario in accelerated mode (`frontlab simulate` or `frontlab run`, \
         which fit the growth order instead)"
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub outcome: Outcome,
    pub samples: usize,
    pub dt: f64,
    pub dx: f64,
    pub t_final: f64,
    pub g_final: f64,
    pub h_final: f64,
    /// Largest excess of the solution over the ODE envelope.
    pub sandwich_excess: f64,
    pub min_before_clamp: f64,
    pub max_asymmetry: f64,
}

pub fn simulate(scenario: &Scenario) -> Result<(Trajectory, RunReport), CliError> {
    let cfg = scenario.simulation_config();
    let traj = fbsolver::run(&scenario.system, &scenario.kernels, &cfg).map_err(|e| match e {
        fbsolver::SimulationError::Invalid(m) => CliError::Validation(format!("fbsolver::run: {m}")),
        other => numerical("fbsolver::run", other),
    })?;
    let report = run_report(scenario, &traj)?;
    Ok((traj, report))
}

pub fn run_report(scenario: &Scenario, traj: &Trajectory) -> Result<RunReport, CliError> {
    let n = traj.len();
    let sandwich =
        fbsolver::sandwich_excess(&scenario.system, traj).map_err(|e| numerical("fbsolver::sandwich_excess", e))?;
    Ok(RunReport {
        name: scenario.config.name.clone(),
        outcome: classify_outcome(traj, &scenario.system, &OutcomeThresholds::default()),
        samples: n,
        dt: traj.dt,
        dx: traj.dx,
        t_final: traj.times[n - 1],
        g_final: traj.g[n - 1],
        h_final: traj.h[n - 1],
        sandwich_excess: sandwich,
        min_before_clamp: traj.min_before_clamp.iter().cloned().fold(f64::INFINITY, f64::min),
        max_asymmetry: traj.g.iter().zip(&traj.h).map(|(g, h)| (g + h).abs()).fold(0.0, f64::max),
    })
}

pub fn analyze(
    times: &[f64],
    h: &[f64],
    c0: Option<f64>,
    gamma_hint: Option<f64>,
    fraction: f64,
) -> Result<AsymptoticsReport, CliError> {
    asymptotics::analyze(times, h, c0, gamma_hint, fraction).map_err(|e| match e {
        asymptotics::AsymptoticsError::InsufficientSamples { .. } | asymptotics::AsymptoticsError::Invalid(_) => {
            CliError::Validation(format!("asymptotics::analyze: {e}"))
        }
        other => numerical("asymptotics::analyze", other),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedComparison {
    pub c0: f64,
    pub fitted_speed: f64,
    pub fitted_speed_stderr: f64,
    pub relative_gap: f64,
    pub g_speed: f64,
    pub g_relative_gap: f64,
    pub window: asymptotics::Window,
}

/// Spreading speed from the flux balance against the slope of a simulation.
pub fn compare_speed(scenario: &Scenario) -> Result<(SpeedComparison, SpeedSummary, Trajectory), CliError> {
    if !scenario.fronts_have_first_moment() {
        return Err(no_first_moment("speed"));
    }
    let (speed, _) = spreading_speed(scenario)?;
    let (traj, _) = simulate(scenario)?;
    let frac = scenario.config.analysis.window_fraction;
    let fit = |v: &[f64]| {
        asymptotics::fit_linear_speed(&traj.times, v, frac).map_err(|e| numerical("asymptotics::fit_linear_speed", e))
    };
    let h = fit(&traj.h)?;
    let g = fit(&traj.g)?;
    let c0 = speed.c0;
    Ok((
        SpeedComparison {
            c0,
            fitted_speed: h.slope,
            fitted_speed_stderr: h.stderr,
            relative_gap: (h.slope - c0).abs() / c0,
            g_speed: -g.slope,
            g_relative_gap: (-g.slope - c0).abs() / c0,
            window: h.window,
        },
        speed,
        traj,
    ))
}

/// Everything a scenario produces, written under `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path, seed: u64) -> Result<PathBuf, CliError> {
    let dir = scenario_dir(scenario, out_dir);
    output::ensure_dir(&dir)?;
    let kernels: Vec<KernelReport> = scenario.kernels.iter().map(kernel_report).collect();
    output::write_json(&dir.join("kernel_report.json"), &kernels)?;
    output::write_json(&dir.join("assumption_report.json"), &check_reaction(scenario, seed))?;
    let c0 = if scenario.fronts_have_first_moment() {
        let (speed, profile) = spreading_speed(scenario)?;
        output::write_json(&dir.join("semiwave_summary.json"), &speed)?;
        output::write_profile_csv(&dir.join("profile.csv"), &profile)?;
        Some(speed.c0)
    } else {
        output::write_json(
            &dir.join("semiwave_summary.json"),
            &serde_json::json!({"mode": "accelerated", "reason": "a front-driving kernel has no finite first moment"}),
        )?;
        None
    };
    let (traj, report) = simulate(scenario)?;
    output::write_trajectory(&dir, &traj)?;
    output::write_json(&dir.join("run_report.json"), &report)?;
    let analysis = analyze(&traj.times, &traj.h, c0, scenario.gamma_hint(), scenario.config.analysis.window_fraction)?;
    output::write_json(&dir.join("asymptotics.json"), &analysis)?;
    Ok(dir)
}

pub fn scenario_dir(scenario: &Scenario, out_dir: &Path) -> PathBuf {
    scenario.config.output_dir.clone().unwrap_or_else(|| out_dir.join(&scenario.config.name))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchFile {
    /// Scenario files, relative to the batch file.
    pub scenarios: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchEntry {
    pub config: String,
    pub exit_code: i32,
    pub message: String,
}

/// Runs every scenario of a batch file in parallel.
pub fn batch(path: &Path, out_dir: &Path, seed: u64) -> Result<Vec<BatchEntry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let batch: BatchFile = match config::Format::from_path(path) {
        config::Format::Toml => {
            let value: toml::Table = toml::from_str(&text).map_err(|e| CliError::Validation(format!("batch: {e}")))?;
            serde_path_to_error::deserialize(toml::Value::Table(value))
                .map_err(|e| CliError::Validation(format!("batch.{}: {}", e.path(), e.inner())))?
        }
        config::Format::Json => {
            let mut de = serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(&mut de)
                .map_err(|e| CliError::Validation(format!("batch.{}: {}", e.path(), e.inner())))?
        }
    };
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(batch
        .scenarios
        .par_iter()
        .map(|rel| {
            let p = base.join(rel);
            let outcome = config::load_scenario(&p).and_then(|s| run_scenario(&s, out_dir, seed));
            match outcome {
                Ok(dir) => BatchEntry { config: rel.display().to_string(), exit_code: 0, message: dir.display().to_string() },
                Err(e) => BatchEntry { config: rel.display().to_string(), exit_code: e.exit_code(), message: e.to_string() },
            }
        })
        .collect())
}
