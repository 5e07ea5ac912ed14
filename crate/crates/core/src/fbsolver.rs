//! Time integration of the free-boundary problem on a fixed lattice.
//!
//! `U` lives on the lattice nodes `k·dx` strictly inside `(g, h)` and is
//! extended linearly to zero at the fronts, which move as continuous reals.
//! Both the convolution and the front laws are integrated exactly for that
//! piecewise-linear function.

use crate::kernels::Kernel;
use crate::lattice::{ConvolutionPath, Convolver, HatWeights};
use crate::reaction::{ReactionError, ReactionSystem};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error("stability violation at t = {t}: species {species} reached {value:.6e}, outside [{lower:.3e}, {upper:.3e}]")]
    Unstable { t: f64, species: usize, value: f64, lower: f64, upper: f64 },
    #[error("wall-clock budget of {seconds} s exceeded at t = {t}")]
    Budget { seconds: f64, t: f64 },
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

/// Allowed excursion outside `[0, û]` before clamping.
pub const STABILITY_TOLERANCE: f64 = 1e-6;

/// Beyond this many cells the squeezed end-cell weight uses three-point
/// Gauss–Legendre instead of exact moments.
const EXACT_CORRECTION_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialShape {
    /// `u*·cos²(πx/2h₀)`.
    Cosine2,
    /// `u*·(1 - x²/h₀²)`.
    Bump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub shape: InitialShape,
    /// Multiplies `u*`.
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData { shape: InitialShape::Cosine2, amplitude: 1.0 }
    }
}

impl InitialData {
    /// Value of species `i` at offset `x` from the centre of `[-h0, h0]`.
    pub fn value(&self, x: f64, h0: f64, u_star: f64) -> f64 {
        if x.abs() >= h0 {
            return 0.0;
        }
        let profile = match self.shape {
            InitialShape::Cosine2 => (std::f64::consts::FRAC_PI_2 * x / h0).cos().powi(2),
            InitialShape::Bump => 1.0 - (x / h0).powi(2),
            InitialShape::Constant => 1.0,
        };
        self.amplitude * u_star * profile
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub h0: f64,
    pub u0: InitialData,
    pub dx: f64,
    pub cfl_factor: f64,
    pub t_final: f64,
    pub sample_dt: f64,
    pub snapshot_times: Vec<f64>,
    /// Shifts the initial interval by this many lattice cells.
    pub shift_cells: i64,
    #[serde(skip)]
    pub path: ConvolutionPath,
    pub max_wall_seconds: Option<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            h0: 10.0,
            u0: InitialData::default(),
            dx: 0.05,
            cfl_factor: 0.5,
            t_final: 100.0,
            sample_dt: 1.0,
            snapshot_times: Vec::new(),
            shift_cells: 0,
            path: ConvolutionPath::Auto,
            max_wall_seconds: None,
        }
    }
}

/// Solution at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierState {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub dx: f64,
    /// Lattice index of the first active node.
    pub first: i64,
    /// `values[i][k]` is species `i` at lattice node `first + k`.
    pub values: Vec<Vec<f64>>,
}

impl FrontierState {
    pub fn initial(system: &ReactionSystem, config: &SimulationConfig) -> Result<Self, SimulationError> {
        let dx = config.dx;
        if !(dx > 0.0 && config.h0 >= 2.0 * dx) {
            return Err(SimulationError::Invalid(format!("need dx > 0 and h0 ≥ 2·dx (h0 = {}, dx = {dx})", config.h0)));
        }
        if !(config.u0.amplitude > 0.0 && config.u0.amplitude.is_finite()) {
            return Err(SimulationError::Invalid("initial amplitude must be positive".into()));
        }
        let centre = config.shift_cells as f64 * dx;
        let g = centre - config.h0;
        let h = centre + config.h0;
        let half = (config.h0 / dx).ceil() as i64;
        let lo = (config.shift_cells - half..).find(|&k| k as f64 * dx > g).expect("lattice is unbounded");
        let hi = (config.shift_cells - half..=config.shift_cells + half)
            .rev()
            .find(|&k| (k as f64 * dx) < h)
            .expect("h0 ≥ 2dx leaves active nodes");
        let values: Vec<Vec<f64>> = (0..system.m)
            .map(|i| {
                (lo..=hi)
                    .map(|k| config.u0.value((k - config.shift_cells) as f64 * dx, config.h0, system.u_star[i]))
                    .collect()
            })
            .collect();
        if let Some(cap) = &system.u_hat {
            for (i, v) in values.iter().enumerate() {
                if v.iter().any(|&x| x > cap[i]) {
                    return Err(SimulationError::Invalid(format!("initial data of species {i} exceeds its cap {}", cap[i])));
                }
            }
        }
        Ok(FrontierState { t: 0.0, g, h, dx, first: lo, values })
    }

    pub fn nodes(&self) -> usize {
        self.values[0].len()
    }

    pub fn x(&self, k: usize) -> f64 {
        (self.first + k as i64) as f64 * self.dx
    }

    /// Grid including both fronts, where every species vanishes.
    pub fn profile(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.nodes();
        let mut xs = Vec::with_capacity(n + 2);
        xs.push(self.g);
        xs.extend((0..n).map(|k| self.x(k)));
        xs.push(self.h);
        let vals = self
            .values
            .iter()
            .map(|v| {
                let mut out = Vec::with_capacity(n + 2);
                out.push(0.0);
                out.extend_from_slice(v);
                out.push(0.0);
                out
            })
            .collect();
        (xs, vals)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dx: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub g_dot: Vec<f64>,
    pub h_dot: Vec<f64>,
    /// Per sample, the value of each species at the initial centre node.
    pub center: Vec<Vec<f64>>,
    /// Per sample, the maximum of each species over the domain.
    pub max_u: Vec<Vec<f64>>,
    /// Per sample, the smallest value seen before clamping since the
    /// previous sample.
    pub min_before_clamp: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, state: &FrontierState, speeds: (f64, f64), centre: usize, min_seen: f64) {
        self.times.push(state.t);
        self.g.push(state.g);
        self.h.push(state.h);
        self.g_dot.push(speeds.0);
        self.h_dot.push(speeds.1);
        self.center.push(state.values.iter().map(|v| v[centre]).collect());
        self.max_u.push(state.values.iter().map(|v| v.iter().cloned().fold(0.0, f64::max)).collect());
        self.min_before_clamp.push(min_seen);
    }
}

/// Reusable operator for one system and kernel set.
#[derive(Debug, Clone)]
pub struct FreeBoundarySolver {
    system: ReactionSystem,
    kernels: Vec<Kernel>,
    convolvers: Vec<Convolver>,
    dx: f64,
    conv: Vec<f64>,
    local: Vec<f64>,
    reaction: Vec<f64>,
}

impl FreeBoundarySolver {
    /// `kernels` holds one kernel per diffusing species, or a single shared one.
    pub fn new(system: &ReactionSystem, kernels: &[Kernel], dx: f64, path: ConvolutionPath) -> Result<Self, SimulationError> {
        let kernels = match kernels.len() {
            1 => vec![kernels[0]; system.m0],
            n if n == system.m0 => kernels.to_vec(),
            n => {
                return Err(SimulationError::Invalid(format!(
                    "expected 1 or {} kernels (one per diffusing species), got {n}",
                    system.m0
                )))
            }
        };
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(SimulationError::Invalid(format!("dx must be positive, got {dx}")));
        }
        let convolvers = kernels.iter().map(|k| Convolver::new(HatWeights::new(*k, dx), path)).collect();
        Ok(FreeBoundarySolver {
            system: system.clone(),
            kernels,
            convolvers,
            dx,
            conv: Vec::new(),
            local: vec![0.0; system.m],
            reaction: vec![0.0; system.m],
        })
    }

    pub fn system(&self) -> &ReactionSystem {
        &self.system
    }

    pub fn set_path(&mut self, path: ConvolutionPath) {
        self.convolvers.iter_mut().for_each(|c| c.set_path(path));
    }

    /// Largest stable step: `cfl / (max d + L̂)`.
    pub fn max_dt(&self, cfl_factor: f64) -> f64 {
        let dmax = self.system.d.iter().cloned().fold(0.0, f64::max);
        cfl_factor / (dmax + self.system.lipschitz)
    }

    /// `(ġ, ḣ)` from the front laws, integrated exactly over every cell of
    /// the piecewise-linear profile.
    pub fn boundary_speeds(&self, state: &FrontierState) -> (f64, f64) {
        let n = state.nodes();
        let (g, h) = (state.g, state.h);
        let mut g_dot = 0.0;
        let mut h_dot = 0.0;
        for (i, &mu) in self.system.mu.iter().enumerate() {
            if mu == 0.0 {
                continue;
            }
            let k = &self.kernels[i];
            let u = &state.values[i];
            let mut left = 0.0;
            let mut right = 0.0;
            let mut cell = |xa: f64, xb: f64, va: f64, vb: f64| {
                if va == 0.0 && vb == 0.0 {
                    return;
                }
                let w = xb - xa;
                right += k.linear_tail_integral((h - xb).max(0.0), w, vb, va);
                left += k.linear_tail_integral((xa - g).max(0.0), w, va, vb);
            };
            cell(g, state.x(0), 0.0, u[0]);
            for j in 0..n - 1 {
                cell(state.x(j), state.x(j + 1), u[j], u[j + 1]);
            }
            cell(state.x(n - 1), h, u[n - 1], 0.0);
            g_dot -= mu * left;
            h_dot += mu * right;
        }
        (g_dot.min(0.0), h_dot.max(0.0))
    }

    /// Right-hand side of the `U` equation at every active node.
    pub fn rhs(&mut self, state: &FrontierState, out: &mut [Vec<f64>]) {
        let n = state.nodes();
        let m = self.system.m;
        let dx = self.dx;
        let theta_left = state.x(0) - state.g;
        let theta_right = state.h - state.x(n - 1);
        self.conv.resize(n, 0.0);
        for i in 0..m {
            let o = &mut out[i];
            o.resize(n, 0.0);
            if i >= self.system.m0 {
                o.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            let u = &state.values[i];
            let cv = &mut self.convolvers[i];
            cv.apply(u, &mut self.conv);
            let k = &self.kernels[i];
            let hw = cv.weights();
            let d = self.system.d[i];
            let (u_lo, u_hi) = (u[0], u[n - 1]);
            for j in 0..n {
                let mut c = self.conv[j];
                if u_lo != 0.0 {
                    c += u_lo * (end_weight(k, hw, j, theta_left, dx) - hw.half_hat(j));
                }
                if u_hi != 0.0 {
                    let r = n - 1 - j;
                    c += u_hi * (end_weight(k, hw, r, theta_right, dx) - hw.half_hat(r));
                }
                o[j] = d * (c - u[j]);
            }
        }
        for j in 0..n {
            for i in 0..m {
                self.local[i] = state.values[i][j];
            }
            self.system.eval_into(&self.local, &mut self.reaction);
            for i in 0..m {
                out[i][j] += self.reaction[i];
            }
        }
    }

    /// One Heun step for `U` and one Euler step for the fronts. Returns the
    /// smallest value seen before clamping.
    pub fn step(&mut self, state: &mut FrontierState, dt: f64, t_new: f64) -> Result<f64, SimulationError> {
        let m = self.system.m;
        let n = state.nodes();
        let (g_dot, h_dot) = self.boundary_speeds(state);
        let mut k1 = vec![Vec::with_capacity(n); m];
        self.rhs(state, &mut k1);
        let mut mid = state.clone();
        for i in 0..m {
            for j in 0..n {
                mid.values[i][j] += dt * k1[i][j];
            }
        }
        let mut k2 = vec![Vec::with_capacity(n); m];
        self.rhs(&mid, &mut k2);
        let mut min_seen = f64::INFINITY;
        for i in 0..m {
            let upper = self.system.u_hat.as_ref().map_or(f64::INFINITY, |c| c[i]);
            let v = &mut state.values[i];
            for j in 0..n {
                let x = v[j] + 0.5 * dt * (k1[i][j] + k2[i][j]);
                min_seen = min_seen.min(x);
                if !x.is_finite() || x < -STABILITY_TOLERANCE || x > upper + STABILITY_TOLERANCE {
                    return Err(SimulationError::Unstable {
                        t: t_new,
                        species: i,
                        value: x,
                        lower: 0.0,
                        upper,
                    });
                }
                v[j] = x.clamp(0.0, upper);
            }
        }
        let g_new = state.g + dt * g_dot;
        let h_new = state.h + dt * h_dot;
        let dxl = state.dx;
        let mut grow_left = 0;
        while ((state.first - grow_left - 1) as f64 * dxl) > g_new {
            grow_left += 1;
        }
        let last = state.first + n as i64 - 1;
        let mut grow_right = 0;
        while ((last + grow_right + 1) as f64 * dxl) < h_new {
            grow_right += 1;
        }
        if grow_left > 0 || grow_right > 0 {
            for v in state.values.iter_mut() {
                let mut nv = vec![0.0; grow_left as usize];
                nv.extend_from_slice(v);
                nv.resize(nv.len() + grow_right as usize, 0.0);
                *v = nv;
            }
            state.first -= grow_left;
        }
        state.g = g_new;
        state.h = h_new;
        state.t = t_new;
        Ok(min_seen)
    }
}

/// Weight of a squeezed end cell of width `theta` whose node sits `cells`
/// lattice steps from the evaluation point.
fn end_weight(k: &Kernel, hw: &HatWeights, cells: usize, theta: f64, dx: f64) -> f64 {
    let a = cells as f64 * dx;
    if cells <= EXACT_CORRECTION_CELLS {
        return hw.squeezed(a, theta);
    }
    let h = 0.5 * theta;
    let off = h * 0.6f64.sqrt();
    let f = |r: f64| k.evaluate(a + r) * (1.0 - r / theta);
    h * (5.0 * f(h - off) + 8.0 * f(h) + 5.0 * f(h + off)) / 9.0
}

/// Integrates to `t_final`, sampling every `sample_dt`.
pub fn run(system: &ReactionSystem, kernels: &[Kernel], config: &SimulationConfig) -> Result<Trajectory, SimulationError> {
    if !(config.t_final >= 0.0 && config.sample_dt > 0.0 && config.cfl_factor > 0.0 && config.cfl_factor <= 1.0) {
        return Err(SimulationError::Invalid("need T ≥ 0, sample_dt > 0 and cfl_factor in (0, 1]".into()));
    }
    let samples = (config.t_final / config.sample_dt).round();
    if (samples * config.sample_dt - config.t_final).abs() > 1e-9 * config.t_final.max(1.0) {
        return Err(SimulationError::Invalid(format!(
            "T_final = {} is not a multiple of sample_dt = {}",
            config.t_final, config.sample_dt
        )));
    }
    let samples = samples as usize;
    let mut solver = FreeBoundarySolver::new(system, kernels, config.dx, config.path)?;
    let mut state = FrontierState::initial(system, config)?;
    let per_sample = (config.sample_dt / solver.max_dt(config.cfl_factor)).ceil().max(1.0) as usize;
    let dt = config.sample_dt / per_sample as f64;
    let total_steps = samples * per_sample;
    let mut snapshot_steps: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .filter(|&&t| t >= 0.0 && t <= config.t_final)
        .map(|&t| (((t / dt).round() as usize).min(total_steps), t))
        .collect();
    snapshot_steps.sort_by_key(|s| s.0);
    let centre = (config.shift_cells - state.first) as usize;
    let mut traj = Trajectory {
        dx: config.dx,
        dt,
        times: Vec::new(),
        g: Vec::new(),
        h: Vec::new(),
        g_dot: Vec::new(),
        h_dot: Vec::new(),
        center: Vec::new(),
        max_u: Vec::new(),
        min_before_clamp: Vec::new(),
        snapshots: Vec::new(),
    };
    let initial_min = state.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    traj.push(&state, solver.boundary_speeds(&state), centre, initial_min);
    let take_snapshots = |step: usize, state: &FrontierState, traj: &mut Trajectory, next: &mut usize| {
        while *next < snapshot_steps.len() && snapshot_steps[*next].0 == step {
            let (x, values) = state.profile();
            traj.snapshots.push(Snapshot { t: state.t, x, values });
            *next += 1;
        }
    };
    let mut next_snapshot = 0;
    take_snapshots(0, &state, &mut traj, &mut next_snapshot);
    let started = Instant::now();
    let budget = config.max_wall_seconds.map(Duration::from_secs_f64);
    let mut min_seen = f64::INFINITY;
    for step in 1..=total_steps {
        let sample_index = step / per_sample;
        let t_new = if step % per_sample == 0 {
            sample_index as f64 * config.sample_dt
        } else {
            (sample_index as f64 * config.sample_dt) + (step % per_sample) as f64 * dt
        };
        let local_min = solver.step(&mut state, dt, t_new)?;
        min_seen = min_seen.min(local_min);
        take_snapshots(step, &state, &mut traj, &mut next_snapshot);
        if step % per_sample == 0 {
            // the centre node stays active because the fronts only move outwards
            let centre = (config.shift_cells - state.first) as usize;
            traj.push(&state, solver.boundary_speeds(&state), centre, min_seen);
            min_seen = f64::INFINITY;
            if let Some(limit) = budget {
                if started.elapsed() > limit {
                    return Err(SimulationError::Budget { seconds: limit.as_secs_f64(), t: state.t });
                }
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Spreading,
    Vanishing,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeThresholds {
    pub vanish_tol: f64,
    /// Relative distance of the centre value from `u*`.
    pub center_tolerance: f64,
    /// Growth of `h` over the last quarter, in cells.
    pub growth_cells: f64,
}

impl Default for OutcomeThresholds {
    fn default() -> Self {
        OutcomeThresholds { vanish_tol: 1e-3, center_tolerance: 0.05, growth_cells: 10.0 }
    }
}

/// Heuristic spreading/vanishing verdict from the last quarter of a run.
pub fn classify_outcome(traj: &Trajectory, system: &ReactionSystem, thresholds: &OutcomeThresholds) -> Outcome {
    let n = traj.len();
    if n == 0 {
        return Outcome::Undecided;
    }
    let t_end = traj.times[n - 1];
    let start = traj.times.iter().position(|&t| t >= 0.75 * t_end).unwrap_or(n - 1);
    let grew = traj.h[n - 1] - traj.h[start];
    let centre_ok = traj.center[n - 1]
        .iter()
        .zip(&system.u_star)
        .all(|(v, u)| (v - u).abs() <= thresholds.center_tolerance * u.abs());
    if grew > thresholds.growth_cells * traj.dx && centre_ok {
        return Outcome::Spreading;
    }
    let width_change = (traj.h[n - 1] - traj.g[n - 1]) - (traj.h[start] - traj.g[start]);
    let max_u = traj.max_u[n - 1].iter().cloned().fold(0.0, f64::max);
    if max_u < thresholds.vanish_tol && width_change.abs() < traj.dx {
        return Outcome::Vanishing;
    }
    Outcome::Undecided
}

/// Solution of `W' = F(W)` at the trajectory's sample times, with `W(0)`
/// the componentwise maximum of the initial data.
pub fn ode_envelope(system: &ReactionSystem, traj: &Trajectory) -> Result<Vec<Vec<f64>>, SimulationError> {
    let mut w = traj.max_u[0].clone();
    let mut out = vec![w.clone()];
    for pair in traj.times.windows(2) {
        let span = pair[1] - pair[0];
        let steps = (span / 0.01).ceil().max(1.0);
        let ode = system.solve_ode(&w, span, span / steps)?;
        w = ode.last().to_vec();
        out.push(w.clone());
    }
    Ok(out)
}

/// Largest excess of `U` over the ODE envelope across all samples.
pub fn sandwich_excess(system: &ReactionSystem, traj: &Trajectory) -> Result<f64, SimulationError> {
    let env = ode_envelope(system, traj)?;
    Ok(traj
        .max_u
        .iter()
        .zip(&env)
        .flat_map(|(u, w)| u.iter().zip(w).map(|(a, b)| a - b))
        .fold(f64::NEG_INFINITY, f64::max))
}
