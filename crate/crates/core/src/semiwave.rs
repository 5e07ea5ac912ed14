//! Monotone profiles on the half line and the speed selected by the front
//! flux.
//!
//! The perturbed profile equation
//! `D∘(J∗Φ) - D∘Φ + cΦ' + F(Φ) = 0` on `x < 0`, `Φ = δ` on `x ≥ 0`,
//! is solved by the monotone Picard iteration
//! `Γ ↦ e^{Mx}δ + (e^{Mx}/c)∫_x^0 e^{-Mξ}[D∘(J∗Γ) + σ(Γ)](ξ) dξ`
//! with `σ(v) = F(v) + (cM - d)∘v` increasing. Starting from `Γ = δ` the
//! iterates increase to the minimal fixed point. Letting `δ → 0` along a
//! halving ladder either settles on a semi-wave or lets the profile escape
//! to `-∞` (traveling-wave regime).

use crate::kernels::{ExtendedReal, Kernel};
use crate::lattice::{ConvolutionPath, Convolver, HatWeights};
use crate::reaction::{ReactionError, ReactionSystem};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiWaveError {
    #[error("invalid semi-wave input: {0}")]
    Invalid(String),
    #[error("Picard iteration did not converge in {iterations} iterations (last increment {increment:.3e})")]
    NoConvergence { iterations: usize, increment: f64 },
    #[error("monotone iteration violated ({what}) by {excess:.3e}; the grid is too coarse")]
    Monotonicity { what: &'static str, excess: f64 },
    #[error("regime at c = {c} is ambiguous after the δ-ladder (shifts {shifts:?}); enlarge L")]
    Ambiguous { c: f64, shifts: Vec<f64> },
    #[error("kernel of species {species} has no finite first moment; the front flux diverges")]
    DivergentFlux { species: usize },
    #[error("no perturbation level with F(εΘ) ≻≻ 0 was found")]
    NoPositivePerturbation,
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiWaveConfig {
    /// Half-length of the computational domain `[-L, 0]`.
    pub length: f64,
    pub dx: f64,
    /// Sup-norm tolerance on both the Picard increment and the residual.
    pub tol: f64,
    pub max_iterations: usize,
    #[serde(skip)]
    pub path: ConvolutionPath,
}

impl Default for SemiWaveConfig {
    fn default() -> Self {
        SemiWaveConfig { length: 60.0, dx: 0.05, tol: 1e-9, max_iterations: 200_000, path: ConvolutionPath::Auto }
    }
}

/// Ladder and regime-detection constants.
pub const LADDER_START: f64 = 1e-2;
pub const LADDER_RUNGS: usize = 12;
pub const ESCAPE_FRACTION: f64 = 0.8;
/// Largest change of the renormalised profile between the last two rungs,
/// relative to `|u*|`, for the ladder to count as settled.
pub const PROFILE_STABILITY: f64 = 1e-5;
/// Largest distance, relative to `|u*|`, between the polished semi-wave and
/// the renormalised last rung.
pub const POLISH_DISTANCE: f64 = 1e-3;
/// Allowed left-end gap, relative to `|u*|`.
pub const LEFT_TOLERANCE: f64 = 1e-3;

/// Samples of a monotone profile on `x_j = -L + j·dx`, `j = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiWaveProfile {
    pub length: f64,
    pub dx: f64,
    pub c: f64,
    pub delta: Vec<f64>,
    /// `values[i][j]` is species `i` at node `j`.
    pub values: Vec<Vec<f64>>,
    pub u_star: Vec<f64>,
    pub iterations: usize,
    /// Residual of the discretised profile equation when the iteration stopped.
    pub residual: f64,
    pub converged_left: bool,
}

impl SemiWaveProfile {
    pub fn nodes(&self) -> usize {
        self.values[0].len()
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.length + j as f64 * self.dx
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.x(j)).collect()
    }

    /// Rightmost `x` with `φ_1(x) = u_1*/2`, by linear interpolation.
    pub fn half_level_shift(&self) -> Option<f64> {
        let half = 0.5 * self.u_star[0];
        let phi = &self.values[0];
        let n = phi.len();
        if phi[n - 1] >= half {
            return Some(0.0);
        }
        (0..n - 1).rev().find(|&j| phi[j] >= half).map(|j| {
            let drop = phi[j] - phi[j + 1];
            let frac = if drop > 0.0 { (phi[j] - half) / drop } else { 0.0 };
            self.x(j) + frac * self.dx
        })
    }

    /// Largest value of species `species` on `[-window, 0]`.
    pub fn max_on_window(&self, species: usize, window: f64) -> f64 {
        (0..self.nodes())
            .filter(|&j| self.x(j) >= -window - 1e-12)
            .map(|j| self.values[species][j])
            .fold(0.0, f64::max)
    }

    fn left_gap_ok(&self) -> bool {
        let scale = self.u_star.iter().map(|v| v.abs()).fold(0.0, f64::max);
        self.values.iter().zip(&self.u_star).all(|(v, &u)| u - v[0] <= LEFT_TOLERANCE * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    SemiWave { profile: SemiWaveProfile },
    TravelingWave,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiWaveResult {
    pub c: f64,
    pub regime: Regime,
    /// Half-level positions along the δ-ladder (`-L` when no crossing).
    pub shift_history: Vec<f64>,
    pub length: f64,
}

impl SemiWaveResult {
    pub fn profile(&self) -> Option<&SemiWaveProfile> {
        match &self.regime {
            Regime::SemiWave { profile } => Some(profile),
            Regime::TravelingWave => None,
        }
    }

    pub fn is_semiwave(&self) -> bool {
        matches!(self.regime, Regime::SemiWave { .. })
    }
}

/// Picard solver for one system, kernel set and grid.
#[derive(Debug, Clone)]
pub struct SemiWaveSolver {
    system: ReactionSystem,
    kernels: Vec<Kernel>,
    config: SemiWaveConfig,
    theta: Vec<f64>,
    convolvers: Vec<Convolver>,
    /// `tails[i][k] = Σ_{m ≥ k} w_m` for `k = 0..=N+1` (entry 0 unused).
    tails: Vec<Vec<f64>>,
    nodes: usize,
    g: Vec<Vec<f64>>,
}

impl SemiWaveSolver {
    /// `kernels` holds one kernel per diffusing species (a single kernel is
    /// shared by all of them).
    pub fn new(system: &ReactionSystem, kernels: &[Kernel], config: SemiWaveConfig) -> Result<Self, SemiWaveError> {
        let kernels = expand_kernels(system, kernels)?;
        if !(config.dx > 0.0 && config.length > config.dx && config.tol > 0.0) {
            return Err(SemiWaveError::Invalid(format!(
                "need 0 < dx < L and tol > 0, got dx = {}, L = {}, tol = {}",
                config.dx, config.length, config.tol
            )));
        }
        let theta = system.principal_eigenpair_at_zero()?.theta;
        let convolvers = kernels
            .iter()
            .map(|k| Convolver::new(HatWeights::new(*k, config.dx), config.path))
            .collect();
        let mut solver = SemiWaveSolver {
            system: system.clone(),
            kernels,
            config,
            theta,
            convolvers,
            tails: Vec::new(),
            nodes: 0,
            g: Vec::new(),
        };
        solver.set_length(config.length);
        Ok(solver)
    }

    pub fn config(&self) -> &SemiWaveConfig {
        &self.config
    }

    pub fn system(&self) -> &ReactionSystem {
        &self.system
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    fn set_length(&mut self, length: f64) {
        let cells = (length / self.config.dx).round().max(2.0) as usize;
        self.config.length = cells as f64 * self.config.dx;
        self.nodes = cells + 1;
        self.tails = self
            .convolvers
            .iter()
            .map(|cv| {
                let hw = cv.weights();
                let mut t = vec![0.0; self.nodes + 1];
                for (k, slot) in t.iter_mut().enumerate().skip(1) {
                    *slot = hw.tail_sum(k);
                }
                t
            })
            .collect();
        self.g = vec![vec![0.0; self.nodes]; self.system.m];
    }

    /// Constant of the monotone splitting: `(max d + L̂)/c + 1`.
    pub fn splitting_constant(&self, c: f64) -> f64 {
        let dmax = self.system.d.iter().cloned().fold(0.0, f64::max);
        (dmax + self.system.lipschitz) / c + 1.0
    }

    /// `δ = εΘ`, with `Θ` the principal eigenvector at 0.
    pub fn delta(&self, eps: f64) -> Vec<f64> {
        self.theta.iter().map(|t| eps * t).collect()
    }

    fn delta_is_admissible(&self, delta: &[f64]) -> bool {
        let mut f = vec![0.0; self.system.m];
        self.system.eval_into(delta, &mut f);
        f.iter().all(|&v| v > 0.0) && delta.iter().zip(&self.system.u_star).all(|(d, u)| d < u)
    }

    /// One application of the iteration map; returns the sup-norm residual
    /// of `gamma` in the discretised equation.
    pub fn apply(&mut self, c: f64, mconst: f64, delta: &[f64], gamma: &[Vec<f64>], out: &mut [Vec<f64>]) -> f64 {
        let m = self.system.m;
        let n = self.nodes;
        let last = n - 1;
        let cm = c * mconst;
        for i in 0..m {
            let gi = &mut self.g[i];
            if i < self.system.m0 {
                self.convolvers[i].apply(&gamma[i], gi);
                let tails = &self.tails[i];
                let left = gamma[i][0];
                let di = self.system.d[i];
                for j in 0..n {
                    gi[j] = di * (gi[j] + left * tails[j + 1] + delta[i] * tails[last - j + 1]);
                }
            } else {
                gi.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let mut u = vec![0.0; m];
        let mut f = vec![0.0; m];
        for j in 0..n {
            for i in 0..m {
                u[i] = gamma[i][j];
            }
            self.system.eval_into(&u, &mut f);
            for i in 0..m {
                self.g[i][j] += f[i] + (cm - self.system.d[i]) * u[i];
            }
        }
        let y = mconst * self.config.dx;
        let decay = (-y).exp();
        let e0 = -(-y).exp_m1() / mconst;
        let e1 = ramp_moment(y) / (mconst * mconst);
        let a = (e0 - e1 / self.config.dx) / c;
        let b = e1 / self.config.dx / c;
        let mut residual: f64 = 0.0;
        for i in 0..m {
            let gi = &self.g[i];
            let gam = &gamma[i];
            let o = &mut out[i];
            o[last] = delta[i];
            for j in (0..last).rev() {
                let source = a * gi[j] + b * gi[j + 1];
                o[j] = decay * o[j + 1] + source;
                let r = (gam[j] - decay * gam[j + 1] - source) * c / e0;
                residual = residual.max(r.abs());
            }
        }
        residual
    }

    /// Residual of a profile in the discretised perturbed equation.
    pub fn residual(&mut self, profile: &SemiWaveProfile) -> f64 {
        let mconst = self.splitting_constant(profile.c);
        let mut out = profile.values.clone();
        self.apply(profile.c, mconst, &profile.delta.clone(), &profile.values, &mut out)
    }

    /// Fixed point of the iteration map with `δ = εΘ`, starting from `δ`.
    pub fn solve_perturbed(&mut self, c: f64, eps: f64) -> Result<SemiWaveProfile, SemiWaveError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(SemiWaveError::Invalid(format!("speed must be positive, got {c}")));
        }
        let delta = self.delta(eps);
        if !self.delta_is_admissible(&delta) {
            return Err(SemiWaveError::NoPositivePerturbation);
        }
        let start: Vec<Vec<f64>> = delta.iter().map(|&d| vec![d; self.nodes]).collect();
        let (values, iterations) = self.iterate(c, &delta, start, true)?;
        Ok(self.finish(c, delta, values, iterations))
    }

    fn finish(&mut self, c: f64, delta: Vec<f64>, values: Vec<Vec<f64>>, iterations: usize) -> SemiWaveProfile {
        let mut profile = SemiWaveProfile {
            length: self.config.length,
            dx: self.config.dx,
            c,
            delta,
            values,
            u_star: self.system.u_star.clone(),
            iterations,
            residual: 0.0,
            converged_left: false,
        };
        profile.residual = self.residual(&profile);
        profile.converged_left = profile.left_gap_ok();
        profile
    }

    /// Picard iteration from `gamma`, which must move monotonically upward
    /// (or downward when `rising` is false) towards the fixed point.
    fn iterate(
        &mut self,
        c: f64,
        delta: &[f64],
        mut gamma: Vec<Vec<f64>>,
        rising: bool,
    ) -> Result<(Vec<Vec<f64>>, usize), SemiWaveError> {
        let m = self.system.m;
        let n = self.nodes;
        let tol = self.config.tol;
        let mconst = self.splitting_constant(c);
        let sign = if rising { 1.0 } else { -1.0 };
        let mut next = gamma.clone();
        let mut increment = f64::INFINITY;
        for iteration in 1..=self.config.max_iterations {
            let residual = self.apply(c, mconst, delta, &gamma, &mut next);
            increment = 0.0;
            let mut wrong_way: f64 = 0.0;
            let mut rise_in_x: f64 = 0.0;
            for i in 0..m {
                for j in 0..n {
                    let d = next[i][j] - gamma[i][j];
                    increment = increment.max(d.abs());
                    wrong_way = wrong_way.max(-sign * d);
                    if j + 1 < n {
                        rise_in_x = rise_in_x.max(next[i][j + 1] - next[i][j]);
                    }
                }
            }
            if wrong_way > 10.0 * tol {
                let what = if rising { "iterates decreased" } else { "iterates increased" };
                return Err(SemiWaveError::Monotonicity { what, excess: wrong_way });
            }
            if rise_in_x > 10.0 * tol {
                return Err(SemiWaveError::Monotonicity { what: "profile increased in x", excess: rise_in_x });
            }
            std::mem::swap(&mut gamma, &mut next);
            if increment < tol && residual < tol {
                return Ok((gamma, iteration));
            }
        }
        Err(SemiWaveError::NoConvergence { iterations: self.config.max_iterations, increment })
    }

    /// The last rung is a supersolution of the unperturbed map, so iterating
    /// that map from it descends to the semi-wave itself. Falls back to the
    /// renormalised rung when the descent stalls or collapses.
    fn polish(&mut self, rung: &SemiWaveProfile) -> SemiWaveProfile {
        let mut fallback = rung.clone();
        normalise(&mut fallback);
        let zero = vec![0.0; self.system.m];
        let Ok((values, iterations)) = self.iterate(rung.c, &zero, rung.values.clone(), false) else {
            return fallback;
        };
        let polished = self.finish(rung.c, zero, values, rung.iterations + iterations);
        let close = profile_distance(&polished, &fallback) <= POLISH_DISTANCE * self.u_scale();
        if close && polished.converged_left {
            polished
        } else {
            fallback
        }
    }

    /// Runs the δ-ladder at speed `c` and decides the regime.
    pub fn solve_semiwave(&mut self, c: f64) -> Result<SemiWaveResult, SemiWaveError> {
        let original = self.config.length;
        let outcome = self.ladder(c);
        let retry = match &outcome {
            Ok(LadderOutcome::SemiWave { profile, .. }) => !profile.converged_left,
            Ok(LadderOutcome::Ambiguous(_)) => true,
            _ => false,
        };
        let outcome = if retry {
            self.set_length(2.0 * original);
            let second = self.ladder(c);
            self.set_length(original);
            second
        } else {
            outcome
        };
        let length = if retry { 2.0 * self.config.length } else { self.config.length };
        match outcome? {
            LadderOutcome::SemiWave { profile, shifts } => {
                let profile = if retry {
                    self.set_length(2.0 * original);
                    let p = self.polish(&profile);
                    self.set_length(original);
                    p
                } else {
                    self.polish(&profile)
                };
                Ok(SemiWaveResult { c, regime: Regime::SemiWave { profile }, shift_history: shifts, length })
            }
            LadderOutcome::Escaped(shifts) => {
                Ok(SemiWaveResult { c, regime: Regime::TravelingWave, shift_history: shifts, length })
            }
            LadderOutcome::Ambiguous(shifts) => Err(SemiWaveError::Ambiguous { c, shifts }),
        }
    }

    fn ladder(&mut self, c: f64) -> Result<LadderOutcome, SemiWaveError> {
        let l = self.config.length;
        let dx = self.config.dx;
        let mut shifts = Vec::new();
        let mut eps = LADDER_START;
        // make sure the first rung is admissible
        while !self.delta_is_admissible(&self.delta(eps)) {
            eps *= 0.5;
            if eps < 1e-12 {
                return Err(SemiWaveError::NoPositivePerturbation);
            }
        }
        let mut previous: Option<SemiWaveProfile> = None;
        for _ in 0..LADDER_RUNGS {
            let profile = self.solve_perturbed(c, eps)?;
            let shift = profile.half_level_shift().unwrap_or(-l);
            shifts.push(shift);
            if shift < -ESCAPE_FRACTION * l {
                return Ok(LadderOutcome::Escaped(shifts));
            }
            let k = shifts.len();
            let stable_shift =
                k >= 3 && (shifts[k - 1] - shifts[k - 2]).abs() < dx && (shifts[k - 2] - shifts[k - 3]).abs() < dx;
            let mut normalised = profile.clone();
            normalise(&mut normalised);
            if stable_shift {
                if let Some(prev) = &previous {
                    if profile_distance(prev, &normalised) <= PROFILE_STABILITY * self.u_scale() {
                        return Ok(LadderOutcome::SemiWave { profile, shifts });
                    }
                }
            }
            previous = Some(normalised);
            if !stable_shift && steady_drift(&shifts, dx) {
                return Ok(LadderOutcome::Escaped(shifts));
            }
            if k < LADDER_RUNGS {
                eps *= 0.5;
            } else if stable_shift {
                return Ok(LadderOutcome::SemiWave { profile, shifts });
            }
        }
        Ok(LadderOutcome::Ambiguous(shifts))
    }

    fn u_scale(&self) -> f64 {
        self.system.u_star.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn profile_distance(a: &SemiWaveProfile, b: &SemiWaveProfile) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

enum LadderOutcome {
    SemiWave { profile: SemiWaveProfile, shifts: Vec<f64> },
    Escaped(Vec<f64>),
    Ambiguous(Vec<f64>),
}

/// A profile sliding left by a nearly constant amount per halving of `δ`
/// never settles: the half-level position diverges like `log(1/δ)`. The
/// steps of a traveling-wave ladder converge geometrically to a positive
/// limit, while semi-wave ladders have steps that collapse to zero.
fn steady_drift(shifts: &[f64], dx: f64) -> bool {
    if shifts.len() < 6 {
        return false;
    }
    let steps: Vec<f64> = shifts.windows(2).map(|w| w[0] - w[1]).collect();
    let diffs: Vec<f64> = steps.windows(2).map(|w| w[1] - w[0]).collect();
    let last = steps[steps.len() - 1];
    let recent = &diffs[diffs.len() - 3..];
    let contracting = recent.windows(2).all(|w| w[1].abs() <= 0.8 * w[0].abs() || w[1].abs() < 1e-3 * last);
    if !contracting || last < 2.0 * dx {
        return false;
    }
    let (d1, d2) = (recent[1], recent[2]);
    let ratio = if d1 != 0.0 { (d2 / d1).clamp(0.0, 0.8) } else { 0.0 };
    let limit = last + d2 * ratio / (1.0 - ratio);
    limit >= 0.5 * last && limit >= 2.0 * dx
}

/// Maps `[δ, u*]` onto `[0, u*]` so that the profile vanishes at the front.
fn normalise(profile: &mut SemiWaveProfile) {
    for (i, v) in profile.values.iter_mut().enumerate() {
        let d = profile.delta[i];
        let u = profile.u_star[i];
        for x in v.iter_mut() {
            *x = ((*x - d) * u / (u - d)).max(0.0);
        }
    }
    profile.delta.iter_mut().for_each(|d| *d = 0.0);
}

/// `(1 - e^{-y}(1 + y))`, accurate for small `y`.
fn ramp_moment(y: f64) -> f64 {
    if y < 0.1 {
        let mut term = y * y / 2.0;
        let mut sum: f64 = 0.0;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            sum += term * (k - 1.0);
            term *= -y / (k + 1.0);
            k += 1.0;
        }
        sum
    } else {
        1.0 - (-y).exp() * (1.0 + y)
    }
}

fn expand_kernels(system: &ReactionSystem, kernels: &[Kernel]) -> Result<Vec<Kernel>, SemiWaveError> {
    match kernels.len() {
        1 => Ok(vec![kernels[0]; system.m0]),
        n if n == system.m0 => Ok(kernels.to_vec()),
        n => Err(SemiWaveError::Invalid(format!(
            "expected 1 or {} kernels (one per diffusing species), got {n}",
            system.m0
        ))),
    }
}

/// `Σ_i μ_i [∫_{-L}^0 φ_i(x) T_i(-x) dx + u_i* ∫_L^∞ T_i]` with `T_i` the
/// tail mass of kernel `i`.
pub fn flux_functional(profile: &SemiWaveProfile, kernels: &[Kernel], mu: &[f64]) -> Result<f64, SemiWaveError> {
    let dx = profile.dx;
    let n = profile.nodes();
    let mut total = 0.0;
    for (i, &mu_i) in mu.iter().enumerate() {
        if mu_i == 0.0 {
            continue;
        }
        let k = if kernels.len() == 1 { &kernels[0] } else { &kernels[i] };
        let correction = match k.tail_integral(profile.length) {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::Infinite => return Err(SemiWaveError::DivergentFlux { species: i }),
        };
        let phi = &profile.values[i];
        let mut sum = 0.0;
        // cell [x_j, x_{j+1}] maps to s = -x ∈ [-x_{j+1}, -x_j]
        for j in (0..n - 1).rev() {
            let s0 = -profile.x(j + 1);
            sum += k.linear_tail_integral(s0.max(0.0), dx, phi[j + 1], phi[j]);
        }
        total += mu_i * (sum + profile.u_star[i] * correction);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub c0: f64,
    /// `M(c0)` evaluated on the profile at the returned speed.
    pub flux: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    #[serde(skip)]
    pub profile: Option<SemiWaveProfile>,
}

/// Sign change of `c - M(c)`, where `M(c) = 0` in the traveling-wave regime.
pub fn find_c0(
    system: &ReactionSystem,
    kernels: &[Kernel],
    config: SemiWaveConfig,
    tol_c: f64,
) -> Result<SpeedEstimate, SemiWaveError> {
    check_first_moments(system, kernels)?;
    let mut solver = SemiWaveSolver::new(system, kernels, config)?;
    let mut evaluations = 0;
    let mut balance = |c: f64, solver: &mut SemiWaveSolver| -> Result<(f64, Option<SemiWaveProfile>), SemiWaveError> {
        evaluations += 1;
        let res = solver.solve_semiwave(c)?;
        match res.regime {
            Regime::SemiWave { profile } => {
                let m = flux_functional(&profile, solver.kernels(), &system.mu)?;
                Ok((c - m, Some(profile)))
            }
            Regime::TravelingWave => Ok((c, None)),
        }
    };
    let mut lo = 0.01;
    let mut ceiling: Option<f64> = None;
    while balance(lo, &mut solver)?.0 >= 0.0 {
        ceiling = Some(lo);
        lo *= 0.1;
        if lo < 1e-8 {
            return Err(SemiWaveError::Invalid(format!("c - M(c) is already nonnegative at c = {lo}")));
        }
    }
    // An ambiguous ladder marks a speed just below the threshold; probe
    // underneath it instead of giving up.
    let mut probe = ceiling.unwrap_or(1.0);
    let mut hi = loop {
        match balance(probe, &mut solver) {
            Ok((p, _)) if p > 0.0 => break probe,
            Ok(_) => {
                lo = probe;
                probe = match ceiling {
                    Some(top) => 0.5 * (lo + top),
                    None => 2.0 * probe,
                };
                if probe > 1e6 {
                    return Err(SemiWaveError::Invalid("no speed with c > M(c) below 1e6".into()));
                }
            }
            Err(e @ SemiWaveError::Ambiguous { .. }) => {
                if probe - lo < tol_c {
                    return Err(e);
                }
                ceiling = Some(probe);
                probe = 0.5 * (lo + probe);
            }
            Err(e) => return Err(e),
        }
    };
    let (c0, p, profile) = loop {
        let mid = 0.5 * (lo + hi);
        let (p, profile) = balance(mid, &mut solver)?;
        if p > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo < tol_c && p.abs() <= 2.0 * tol_c) || hi - lo < 1e-12 * hi {
            break (mid, p, profile);
        }
    };
    Ok(SpeedEstimate { c0, flux: c0 - p, bracket: (lo, hi), evaluations, profile })
}

fn check_first_moments(system: &ReactionSystem, kernels: &[Kernel]) -> Result<(), SemiWaveError> {
    let kernels = expand_kernels(system, kernels)?;
    for (i, k) in kernels.iter().enumerate() {
        if system.mu[i] > 0.0 && !k.classify().satisfies_j1 {
            return Err(SemiWaveError::DivergentFlux { species: i });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CStarBracket {
    Finite { low: f64, high: f64 },
    /// No flip on the grid and some kernel is not thin-tailed.
    Unbounded { grid_top: f64 },
    /// No flip on the grid although all kernels are thin-tailed.
    NotReached { grid_top: f64 },
    /// Already past the threshold at the first grid point.
    BelowGrid { first: f64 },
}

/// Scans an increasing speed grid for the first non-semi-wave speed. An
/// ambiguous ladder counts as non-semi-wave.
pub fn bracket_cstar(
    system: &ReactionSystem,
    kernels: &[Kernel],
    config: SemiWaveConfig,
    grid: &[f64],
) -> Result<CStarBracket, SemiWaveError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(SemiWaveError::Invalid("speed grid must be positive and increasing".into()));
    }
    let solver = SemiWaveSolver::new(system, kernels, config)?;
    let flags: Vec<bool> = grid
        .par_iter()
        .map(|&c| {
            let mut s = solver.clone();
            match s.solve_semiwave(c) {
                Ok(r) => Ok(r.is_semiwave()),
                Err(SemiWaveError::Ambiguous { .. }) => Ok(false),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    match flags.iter().position(|&f| !f) {
        Some(0) => Ok(CStarBracket::BelowGrid { first: grid[0] }),
        Some(k) => Ok(CStarBracket::Finite { low: grid[k - 1], high: grid[k] }),
        None => {
            let thin = solver.kernels().iter().all(|k| k.classify().satisfies_j2);
            let top = *grid.last().expect("nonempty grid");
            Ok(if thin { CStarBracket::NotReached { grid_top: top } } else { CStarBracket::Unbounded { grid_top: top } })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    /// `u* - φ ≈ C e^{βx}`.
    Exponential { rate: f64 },
    /// `u* - φ ≈ C |x|^{-α}`.
    Algebraic { exponent: f64 },
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub kind: TailKind,
    pub r_squared: f64,
    pub exponential_r_squared: f64,
    pub algebraic_r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Classifies the decay of `u_1* - φ_1` on `[-0.8L, -0.2L]`.
pub fn tail_report(profile: &SemiWaveProfile) -> TailReport {
    let l = profile.length;
    let window = (-0.8 * l, -0.2 * l);
    let u = profile.u_star[0];
    let floor = 1e-10 * u.abs().max(1.0);
    let mut xs = Vec::new();
    let mut gaps = Vec::new();
    let mut any_gap = false;
    for j in 0..profile.nodes() {
        let x = profile.x(j);
        if x < window.0 - 1e-12 || x > window.1 + 1e-12 {
            continue;
        }
        let gap = u - profile.values[0][j];
        if gap > 1e-12 {
            any_gap = true;
        }
        if gap > floor {
            xs.push(x);
            gaps.push(gap.ln());
        }
    }
    if !any_gap || xs.len() < 3 {
        return TailReport {
            kind: TailKind::Flat,
            r_squared: 1.0,
            exponential_r_squared: 0.0,
            algebraic_r_squared: 0.0,
            window,
            points: xs.len(),
        };
    }
    let exp_fit = least_squares(&xs, &gaps);
    let logs: Vec<f64> = xs.iter().map(|x| x.abs().ln()).collect();
    let alg_fit = least_squares(&logs, &gaps);
    let (kind, r2) = if exp_fit.2 >= alg_fit.2 {
        (TailKind::Exponential { rate: exp_fit.0 }, exp_fit.2)
    } else {
        (TailKind::Algebraic { exponent: -alg_fit.0 }, alg_fit.2)
    };
    TailReport {
        kind,
        r_squared: r2,
        exponential_r_squared: exp_fit.2,
        algebraic_r_squared: alg_fit.2,
        window,
        points: xs.len(),
    }
}

/// `(slope, intercept, R²)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, my - slope * mx, r2)
}
