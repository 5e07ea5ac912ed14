//! End-to-end acceptance runs. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fail.

use frontlab::fbsolver::{FreeBoundarySolver, FrontierState, SimulationConfig};
use frontlab::kernels::Kernel;
use frontlab::lattice::ConvolutionPath;
use frontlab::reaction::ReactionSystem;
use frontlab::semiwave::{self, CStarBracket, SemiWaveConfig, SemiWaveProfile, SemiWaveSolver, TailKind};
use frontlab_cli::config::{self, Scenario};
use frontlab_cli::{RunReport, SpeedComparison};
use std::path::Path;
use std::time::{Duration, Instant};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

type Check = Result<Verdict, String>;

fn preset(name: &str) -> Result<Scenario, String> {
    config::load_scenario(&config::preset_path(name).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn within(elapsed: Duration, minutes: f64) -> bool {
    elapsed.as_secs_f64() <= 60.0 * minutes
}

/// Simulation reports gathered for the sandwich criterion.
#[derive(Default)]
struct Runs(Vec<RunReport>);

impl Runs {
    fn simulate(&mut self, s: &Scenario) -> Result<frontlab::fbsolver::Trajectory, String> {
        let (traj, report) = frontlab_cli::simulate(s).map_err(|e| e.to_string())?;
        self.0.push(report);
        Ok(traj)
    }

    fn compare(&mut self, s: &Scenario) -> Result<(SpeedComparison, frontlab_cli::SpeedSummary), String> {
        let (cmp, speed, traj) = frontlab_cli::compare_speed(s).map_err(|e| e.to_string())?;
        self.0.push(frontlab_cli::run_report(s, &traj).map_err(|e| e.to_string())?);
        Ok((cmp, speed))
    }
}

struct Headline {
    cmp: SpeedComparison,
    speed: frontlab_cli::SpeedSummary,
    profile: SemiWaveProfile,
    scenario: Scenario,
    max_asymmetry: f64,
}

fn headline(runs: &mut Runs) -> Result<(Headline, Duration), String> {
    let start = Instant::now();
    let scenario = preset("fisher-kpp-laplace")?;
    let (cmp, speed) = runs.compare(&scenario)?;
    let elapsed = start.elapsed();
    let mut plain = scenario.config.clone();
    plain.semiwave.c_grid.clear();
    let plain = config::build_scenario(plain).map_err(|e| e.to_string())?;
    let (_, profile) = frontlab_cli::spreading_speed(&plain).map_err(|e| e.to_string())?;
    let max_asymmetry = runs.0.last().map_or(f64::INFINITY, |r| r.max_asymmetry);
    Ok((Headline { cmp, speed, profile, scenario, max_asymmetry }, elapsed))
}

fn speed_agreement(h: &Headline, elapsed: Duration) -> Check {
    let c = &h.cmp;
    Ok(verdict(
        c.relative_gap <= 0.05 && c.g_relative_gap <= 0.05 && within(elapsed, 5.0),
        format!(
            "c0 = {:.5}, h-slope = {:.5} (gap {:.2}%), |g-slope| = {:.5} (gap {:.2}%), {:.1}s",
            c.c0,
            c.fitted_speed,
            100.0 * c.relative_gap,
            c.g_speed,
            100.0 * c.g_relative_gap,
            elapsed.as_secs_f64()
        ),
    ))
}

fn flux_identity(h: &Headline) -> Check {
    let tol_c = h.scenario.config.semiwave.tol_c;
    // Recompute the flux from the profile instead of trusting the search.
    let flux = semiwave::flux_functional(&h.profile, &h.scenario.kernels, &h.scenario.system.mu).map_err(|e| e.to_string())?;
    let gap = (h.speed.c0 - flux).abs();
    Ok(verdict(
        tol_c == 1e-4 && gap <= 2.0 * tol_c,
        format!("|c0 - M(c0)| = {gap:.2e} with tol_c = {tol_c:e}"),
    ))
}

fn dichotomy(h: &Headline) -> Check {
    let start = Instant::now();
    let s = &h.scenario;
    let bracket = semiwave::bracket_cstar(&s.system, &s.kernels, s.semiwave_config(), &s.config.semiwave.c_grid)
        .map_err(|e| e.to_string())?;
    let CStarBracket::Finite { low, high } = bracket else {
        return Ok(verdict(false, format!("laplace bracket: {bracket:?}")));
    };
    let mut maxima = Vec::new();
    for &c in s.config.semiwave.c_grid.iter().filter(|&&c| c <= low) {
        let (_, profile) = frontlab_cli::semiwave_at(s, c).map_err(|e| e.to_string())?;
        let p = profile.ok_or_else(|| format!("no semi-wave at c = {c} below the bracket"))?;
        maxima.push((c, p.max_on_window(0, 2.0) / p.u_star[0]));
    }
    let laplace_time = start.elapsed();
    let decreasing = maxima.windows(2).all(|w| w[1].1 < w[0].1);
    let last = maxima.last().map_or(f64::INFINITY, |m| m.1);

    let start = Instant::now();
    let heavy = vec![Kernel::algebraic(2.5).map_err(|e| e.to_string())?];
    let cfg = SemiWaveConfig { dx: 0.1, ..SemiWaveConfig::default() };
    let heavy_bracket = semiwave::bracket_cstar(&s.system, &heavy, cfg, &[0.5, 1.0, 2.0, 4.0, 8.0])
        .map_err(|e| e.to_string())?;
    let heavy_time = start.elapsed();
    let unbounded = matches!(heavy_bracket, CStarBracket::Unbounded { .. });
    let shown: Vec<String> = maxima.iter().map(|(c, m)| format!("{c}:{m:.4}")).collect();
    Ok(verdict(
        decreasing && last < 0.05 && unbounded && within(laplace_time, 2.0) && within(heavy_time, 2.0),
        format!(
            "laplace C* in [{low}, {high}], max on [-2,0] / u* = [{}] ({:.1}s); algebraic(2.5): {heavy_bracket:?} ({:.1}s)",
            shown.join(", "),
            laplace_time.as_secs_f64(),
            heavy_time.as_secs_f64()
        ),
    ))
}

/// Counts nodes where `upper` falls below `lower` by more than the solve
/// tolerance; the fixed points are only resolved to that level.
fn order_violations(upper: &SemiWaveProfile, lower: &SemiWaveProfile, tol: f64) -> usize {
    upper.values.iter().zip(&lower.values).map(|(u, l)| u.iter().zip(l).filter(|(a, b)| **b - **a > tol).count()).sum()
}

/// Interior steps (where `u* - φ > 1e-6 u*`) that drop by less than 1e-8.
fn flat_steps(p: &SemiWaveProfile) -> usize {
    p.values
        .iter()
        .zip(&p.u_star)
        .map(|(v, &u)| (0..v.len() - 1).filter(|&j| u - v[j] > 1e-6 * u && v[j] - v[j + 1] < 1e-8).count())
        .sum()
}

fn monotonicity() -> Check {
    let system = ReactionSystem::logistic();
    let mut ladder = 0;
    let mut in_c = 0;
    let mut flat = 0;
    let mut profiles = 0;
    for kernel in [Kernel::laplace(1.0), Kernel::algebraic(3.5)] {
        let kernels = vec![kernel.map_err(|e| e.to_string())?];
        let mut solver = SemiWaveSolver::new(&system, &kernels, SemiWaveConfig::default()).map_err(|e| e.to_string())?;
        let rungs = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&eps| solver.solve_perturbed(0.2, eps))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let tol = solver.config().tol;
        ladder += rungs.windows(2).map(|w| order_violations(&w[0], &w[1], tol)).sum::<usize>();
        let waves = [0.1, 0.2, 0.3]
            .iter()
            .map(|&c| solver.solve_semiwave(c).map(|r| r.profile().cloned()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let waves: Vec<SemiWaveProfile> =
            waves.into_iter().collect::<Option<_>>().ok_or("a semi-wave speed fell in the traveling-wave regime")?;
        in_c += waves.windows(2).map(|w| order_violations(&w[0], &w[1], tol)).sum::<usize>();
        flat += rungs.iter().chain(&waves).map(flat_steps).sum::<usize>();
        profiles += rungs.len() + waves.len();
    }
    Ok(verdict(
        ladder == 0 && in_c == 0 && flat == 0,
        format!("{profiles} profiles: {ladder} ladder, {in_c} speed-order, {flat} flat-step violations"),
    ))
}

fn tail_laws(h: &Headline, heavy: &SemiWaveProfile) -> Check {
    let thin = semiwave::tail_report(&h.profile);
    let alg = semiwave::tail_report(heavy);
    let exponent = match alg.kind {
        TailKind::Algebraic { exponent } => exponent,
        _ => f64::NAN,
    };
    Ok(verdict(
        matches!(thin.kind, TailKind::Exponential { .. })
            && thin.exponential_r_squared > 0.99
            && (2.0..=3.0).contains(&exponent),
        format!(
            "laplace: {:?} R2 = {:.5}; algebraic(3.5): exponent {exponent:.3} (kind {:?})",
            thin.kind, thin.exponential_r_squared, alg.kind
        ),
    ))
}

fn accelerated(runs: &mut Runs) -> Check {
    let start = Instant::now();
    let s = preset("algebraic-1.5")?;
    let traj = runs.simulate(&s)?;
    let report = frontlab_cli::analyze(&traj.times, &traj.h, None, s.gamma_hint(), s.config.analysis.window_fraction)
        .map_err(|e| e.to_string())?;
    let fast_time = start.elapsed();
    let p = report.growth_exponent.as_ref().map_or(f64::NAN, |g| g.p);

    let start = Instant::now();
    let s = preset("algebraic-2.0")?;
    let traj = runs.simulate(&s)?;
    let report = frontlab_cli::analyze(&traj.times, &traj.h, None, s.gamma_hint(), s.config.analysis.window_fraction)
        .map_err(|e| e.to_string())?;
    let border_time = start.elapsed();
    let spread = report.tlnt_ratio.as_ref().map_or(f64::INFINITY, |r| r.spread());
    Ok(verdict(
        (1.7..=2.3).contains(&p) && spread <= 2.0 && within(fast_time, 15.0) && within(border_time, 15.0),
        format!(
            "algebraic(1.5): exponent {p:.3} ({:.1}s); algebraic(2.0): h/(t ln t) max/min = {spread:.3} ({:.1}s)",
            fast_time.as_secs_f64(),
            border_time.as_secs_f64()
        ),
    ))
}

fn bounded_lag(runs: &mut Runs) -> Result<(Verdict, SemiWaveProfile), String> {
    let start = Instant::now();
    let s = preset("algebraic-3.5")?;
    let (speed, profile) = frontlab_cli::spreading_speed(&s).map_err(|e| e.to_string())?;
    let traj = runs.simulate(&s)?;
    let elapsed = start.elapsed();
    let n = traj.len();
    let lag: Vec<f64> = (n / 2..n).map(|k| speed.c0 * traj.times[k] - traj.h[k]).collect();
    let band = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = band(&lag);
    let quarter = band(&lag[lag.len() / 2..]);
    let dx = s.config.simulation.dx;
    Ok((
        verdict(
            quarter <= 5.0 * dx && within(elapsed, 15.0),
            format!(
                "c0 = {:.5}; c0 t - h band: trailing half {half:.4}, last quarter {quarter:.4} (limit {:.3}), {:.1}s",
                speed.c0,
                5.0 * dx,
                elapsed.as_secs_f64()
            ),
        ),
        profile,
    ))
}

fn lag_order(runs: &mut Runs) -> Check {
    let start = Instant::now();
    let s = preset("algebraic-2.5")?;
    let (speed, _) = frontlab_cli::spreading_speed(&s).map_err(|e| e.to_string())?;
    let traj = runs.simulate(&s)?;
    let report = frontlab_cli::analyze(&traj.times, &traj.h, Some(speed.c0), s.gamma_hint(), s.config.analysis.window_fraction)
        .map_err(|e| e.to_string())?;
    let fit = report.lag_fit.ok_or("no lag fit")?;
    let q = fit.power.q;
    Ok(verdict(
        (0.35..=0.65).contains(&q),
        format!("c0 = {:.5}; power-model exponent {q:.3}, chosen {:?}, {:.1}s", speed.c0, fit.model, start.elapsed().as_secs_f64()),
    ))
}

fn sandwich(runs: &Runs) -> Check {
    let worst = runs.0.iter().map(|r| r.sandwich_excess).fold(0.0, f64::max);
    let lowest = runs.0.iter().map(|r| r.min_before_clamp).fold(f64::INFINITY, f64::min);
    Ok(verdict(
        !runs.0.is_empty() && worst <= 1e-6 && lowest >= 0.0,
        format!("{} simulations: max excess over ODE envelope {worst:.2e}, min U {lowest:.2e}", runs.0.len()),
    ))
}

fn oracle_equivalence(h: &Headline) -> Check {
    let mut worst: f64 = 0.0;
    let mut nodes = 0;
    for (system, kernels) in [
        (ReactionSystem::logistic(), vec![Kernel::laplace(1.0)]),
        (ReactionSystem::logistic(), vec![Kernel::algebraic(2.5)]),
        (ReactionSystem::west_nile_default(), vec![Kernel::gaussian(1.0), Kernel::laplace(0.5)]),
    ] {
        let kernels = kernels.into_iter().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        let cfg = SimulationConfig { h0: 4.9, dx: 0.05, ..SimulationConfig::default() };
        let state = FrontierState::initial(&system, &cfg).map_err(|e| e.to_string())?;
        nodes = nodes.max(state.nodes());
        let mut solver = FreeBoundarySolver::new(&system, &kernels, cfg.dx, ConvolutionPath::Direct).map_err(|e| e.to_string())?;
        let mut direct = vec![vec![0.0; state.nodes()]; system.m];
        solver.rhs(&state, &mut direct);
        solver.set_path(ConvolutionPath::Fft);
        let mut fft = vec![vec![0.0; state.nodes()]; system.m];
        solver.rhs(&state, &mut fft);
        for (a, b) in direct.iter().flatten().zip(fft.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    let mut solver = SemiWaveSolver::new(&h.scenario.system, &h.scenario.kernels, h.scenario.semiwave_config())
        .map_err(|e| e.to_string())?;
    let residual = solver.residual(&h.profile);
    let tol = solver.config().tol;
    Ok(verdict(
        nodes <= 200 && worst <= 1e-10 && residual <= 5.0 * tol,
        format!("N = {nodes}: max |fft - direct| = {worst:.2e}; semi-wave residual {residual:.2e} (tol {tol:e})"),
    ))
}

fn multi_species(runs: &mut Runs) -> Check {
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["west-nile", "epidemic"] {
        let start = Instant::now();
        let s = preset(name)?;
        let (cmp, _) = runs.compare(&s)?;
        let ok = cmp.relative_gap <= 0.08 && (name != "west-nile" || cmp.g_relative_gap <= 0.08);
        pass &= ok;
        lines.push(format!(
            "{name}: c0 = {:.5}, slope = {:.5}, gap {:.2}% ({:.1}s)",
            cmp.c0,
            cmp.fitted_speed,
            100.0 * cmp.relative_gap,
            start.elapsed().as_secs_f64()
        ));
    }
    Ok(verdict(pass, lines.join("; ")))
}

fn tree_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|entry| {
            let p = entry.map_err(|e| e.to_string())?.path();
            let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
            Ok((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism(h: &Headline) -> Check {
    let mut cfg = h.scenario.config.clone();
    cfg.semiwave.c_grid.clear();
    cfg.simulation.t_final = 30.0;
    cfg.simulation.snapshot_times = vec![0.0, 15.0, 30.0];
    let scenario = config::build_scenario(cfg).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dir = frontlab_cli::run_scenario(&scenario, tmp.path(), frontlab_cli::DEFAULT_SEED).map_err(|e| e.to_string())?;
        trees.push(tree_bytes(&dir)?);
    }
    let identical = trees[0] == trees[1];
    let dx = h.scenario.config.simulation.dx;
    Ok(verdict(
        identical && h.max_asymmetry < dx,
        format!(
            "max |g + h| = {:.2e} (dx {dx}); {} output files byte-identical: {identical}",
            h.max_asymmetry,
            trees[0].len()
        ),
    ))
}

fn report(results: &mut Vec<(usize, &'static str, Check)>, id: usize, name: &'static str, check: Check) {
    let line = match &check {
        Ok(v) => format!("criterion {id:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail),
        Err(e) => format!("criterion {id:>2} FAIL {name}: error: {e}"),
    };
    println!("{line}");
    results.push((id, name, check));
}

fn main() {
    let mut results = Vec::new();
    let mut runs = Runs::default();
    let head = headline(&mut runs);
    let (head, elapsed) = match head {
        Ok(h) => h,
        Err(e) => {
            println!("criterion  1 FAIL speed agreement: error: {e}");
            std::process::exit(1);
        }
    };
    report(&mut results, 1, "speed agreement", speed_agreement(&head, elapsed));
    report(&mut results, 2, "flux identity", flux_identity(&head));
    report(&mut results, 3, "dichotomy", dichotomy(&head));
    report(&mut results, 4, "monotonicity", monotonicity());
    let lag = bounded_lag(&mut runs);
    let heavy_profile = lag.as_ref().map(|(_, p)| p.clone()).map_err(|e| e.clone());
    report(&mut results, 5, "tail laws", heavy_profile.and_then(|p| tail_laws(&head, &p)));
    report(&mut results, 6, "accelerated spreading", accelerated(&mut runs));
    report(&mut results, 7, "bounded lag", lag.map(|(v, _)| v));
    report(&mut results, 8, "lag growth order", lag_order(&mut runs));
    report(&mut results, 10, "oracle equivalence", oracle_equivalence(&head));
    report(&mut results, 11, "multi-species", multi_species(&mut runs));
    report(&mut results, 12, "determinism and symmetry", determinism(&head));
    report(&mut results, 9, "comparison sandwich", sandwich(&runs));
    let failed = results.iter().filter(|(_, _, c)| !matches!(c, Ok(v) if v.pass)).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
