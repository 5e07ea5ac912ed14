//! Growth-law fits for front trajectories and the lag lower bound.

use crate::kernels::{ExtendedReal, Kernel};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("only {found} samples in the fit window (need {needed})")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("nonpositive value {value} at t = {t} in the fit window")]
    Nonpositive { t: f64, value: f64 },
    #[error("lag c0·t - h(t) = {lag} ≤ 0 at t = {t}; c0 is probably over-estimated")]
    NegativeLag { t: f64, lag: f64 },
    #[error("the tail term of the lag bound diverges for this kernel")]
    Divergent,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub const MIN_SAMPLES: usize = 10;
/// Fraction of the horizon dropped at the end of every fit window.
pub const END_EXCLUSION: f64 = 0.02;
pub const DEFAULT_FRACTION: f64 = 0.5;
/// Preference for the logarithmic lag model, as a fraction of its residual.
pub const LOG_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

/// Trailing `fraction` of the horizon, minus the final 2%.
pub fn trailing_window(times: &[f64], fraction: f64) -> Result<Window, AsymptoticsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AsymptoticsError::Invalid(format!("window fraction must lie in (0, 1], got {fraction}")));
    }
    let (t0, t1) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(AsymptoticsError::InsufficientSamples { found: 0, needed: MIN_SAMPLES }),
    };
    let span = t1 - t0;
    Ok(Window { start: t1 - fraction * span, end: t1 - END_EXCLUSION * span })
}

fn select(times: &[f64], values: &[f64], w: Window) -> Result<(Vec<f64>, Vec<f64>), AsymptoticsError> {
    if times.len() != values.len() {
        return Err(AsymptoticsError::Invalid("times and values differ in length".into()));
    }
    let eps = 1e-12 * (w.end.abs() + 1.0);
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= w.start - eps && t <= w.end + eps)
        .map(|(&t, &v)| (t, v))
        .unzip();
    if t.len() < MIN_SAMPLES {
        return Err(AsymptoticsError::InsufficientSamples { found: t.len(), needed: MIN_SAMPLES });
    }
    Ok((t, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub sse: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_stderr = if x.len() > 2 && sxx > 0.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LineFit { slope, intercept, slope_stderr, r_squared, sse }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSpeed {
    pub slope: f64,
    pub stderr: f64,
    pub window: Window,
}

/// Least-squares slope of `values` over the trailing window.
pub fn fit_linear_speed(times: &[f64], values: &[f64], fraction: f64) -> Result<LinearSpeed, AsymptoticsError> {
    let window = trailing_window(times, fraction)?;
    let (t, v) = select(times, values, window)?;
    let fit = least_squares(&t, &v);
    Ok(LinearSpeed { slope: fit.slope, stderr: fit.slope_stderr, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthOrder {
    pub p: f64,
    pub r_squared: f64,
    pub window: Window,
}

/// Slope of `log h` against `log t`.
pub fn fit_growth_order(times: &[f64], values: &[f64], fraction: f64) -> Result<GrowthOrder, AsymptoticsError> {
    let window = trailing_window(times, fraction)?;
    let (t, v) = select(times, values, window)?;
    for (&ti, &vi) in t.iter().zip(&v) {
        if ti <= 0.0 || vi <= 0.0 {
            return Err(AsymptoticsError::Nonpositive { t: ti, value: vi.min(ti) });
        }
    }
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let fit = least_squares(&lt, &lv);
    Ok(GrowthOrder { p: fit.slope, r_squared: fit.r_squared, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRange {
    pub min: f64,
    pub max: f64,
    pub window: Window,
}

impl RatioRange {
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }
}

/// Range of `h/(t ln t)` over the trailing window (`t > 1`).
pub fn tlnt_ratio(times: &[f64], values: &[f64], fraction: f64) -> Result<RatioRange, AsymptoticsError> {
    let window = trailing_window(times, fraction)?;
    let (t, v) = select(times, values, window)?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (&ti, &vi) in t.iter().zip(&v) {
        if ti <= 1.0 {
            return Err(AsymptoticsError::Nonpositive { t: ti, value: ti.ln() });
        }
        let r = vi / (ti * ti.ln());
        min = min.min(r);
        max = max.max(r);
    }
    Ok(RatioRange { min, max, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLag {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLag {
    pub a: f64,
    pub q: f64,
    pub b: f64,
    pub r_squared: f64,
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LagModel {
    Log,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagFit {
    pub model: LagModel,
    /// The two residuals are within the preference margin of each other.
    pub tie: bool,
    pub log: LogLag,
    pub power: PowerLag,
    /// `3 - γ` when a kernel exponent in `(2, 3)` was supplied.
    pub expected_exponent: Option<f64>,
    pub window: Window,
}

/// Fits `ℓ(t) = c0·t - h(t)` with `a·ln t + b` and `a·t^q + b`.
pub fn fit_lag(
    times: &[f64],
    values: &[f64],
    c0: f64,
    gamma_hint: Option<f64>,
    fraction: f64,
) -> Result<LagFit, AsymptoticsError> {
    if !(c0 > 0.0) {
        return Err(AsymptoticsError::Invalid(format!("c0 must be positive, got {c0}")));
    }
    let window = trailing_window(times, fraction)?;
    let (t, v) = select(times, values, window)?;
    let lag: Vec<f64> = t.iter().zip(&v).map(|(&ti, &hi)| c0 * ti - hi).collect();
    for (&ti, &li) in t.iter().zip(&lag) {
        if li <= 0.0 {
            return Err(AsymptoticsError::NegativeLag { t: ti, lag: li });
        }
        if ti <= 0.0 {
            return Err(AsymptoticsError::Nonpositive { t: ti, value: ti });
        }
    }
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let lf = least_squares(&lt, &lag);
    let log = LogLag { a: lf.slope, b: lf.intercept, r_squared: lf.r_squared, sse: lf.sse };
    let power = fit_power(&t, &lag);
    let tie = (power.sse - log.sse).abs() <= LOG_MARGIN * log.sse.max(power.sse);
    let model = if power.sse < (1.0 - LOG_MARGIN) * log.sse { LagModel::Power } else { LagModel::Log };
    let expected_exponent = gamma_hint.filter(|g| *g > 2.0 && *g < 3.0).map(|g| 3.0 - g);
    Ok(LagFit { model, tie, log, power, expected_exponent, window })
}

/// `a·t^q + b` by profiling `q`: coarse scan, then golden section.
fn fit_power(t: &[f64], y: &[f64]) -> PowerLag {
    let scale = t.iter().cloned().fold(0.0, f64::max);
    let fit_at = |q: f64| {
        let x: Vec<f64> = t.iter().map(|ti| (ti / scale).powf(q)).collect();
        least_squares(&x, y)
    };
    let (lo, hi) = (1e-3, 3.0);
    let grid = 300;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=grid {
        let q = lo + (hi - lo) * k as f64 / grid as f64;
        let sse = fit_at(q).sse;
        if sse < best.1 {
            best = (q, sse);
        }
    }
    let step = (hi - lo) / grid as f64;
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (fit_at(c).sse, fit_at(d).sse);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = fit_at(c).sse;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = fit_at(d).sse;
        }
    }
    let q = 0.5 * (a + b);
    let fit = fit_at(q);
    PowerLag { a: fit.slope / scale.powf(q), q, b: fit.intercept, r_squared: fit.r_squared, sse: fit.sse }
}

/// `1 + ∫_0^t (1+x)^{-α} dx + ∫_0^{c0 t/2} x² Ĵ(x) dx + t ∫_{c0 t/2}^∞ x Ĵ(x) dx`
/// with `Ĵ` the sum of the given kernels.
pub fn lag_lower_bound(kernels: &[Kernel], alpha: f64, c0: f64, t: f64) -> Result<f64, AsymptoticsError> {
    if !(alpha >= 1.0) || !(c0 > 0.0) || !(t >= 0.0) {
        return Err(AsymptoticsError::Invalid(format!("need α ≥ 1, c0 > 0, t ≥ 0 (α = {alpha}, c0 = {c0}, t = {t})")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let decay = if alpha == 1.0 { t.ln_1p() } else { ((1.0 + t).powf(1.0 - alpha) - 1.0) / (1.0 - alpha) };
    let a = 0.5 * c0 * t;
    let mut near = 0.0;
    let mut far = 0.0;
    for k in kernels {
        near += k.local_moment(2, 0.0, a).finite().expect("finite interval");
        far += match k.upper_first_moment(a) {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::Infinite => return Err(AsymptoticsError::Divergent),
        };
    }
    Ok(1.0 + decay + near + t * far)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub linear_speed: Option<LinearSpeed>,
    pub growth_exponent: Option<GrowthOrder>,
    pub tlnt_ratio: Option<RatioRange>,
    pub lag_fit: Option<LagFit>,
    pub window: Window,
    /// Reasons for fits that could not be made.
    pub notes: Vec<String>,
}

/// All fits on the trailing window; fits whose preconditions fail are
/// reported in `notes`.
pub fn analyze(
    times: &[f64],
    values: &[f64],
    c0: Option<f64>,
    gamma_hint: Option<f64>,
    fraction: f64,
) -> Result<AsymptoticsReport, AsymptoticsError> {
    let window = trailing_window(times, fraction)?;
    let mut notes = Vec::new();
    let linear_speed = keep(&mut notes, "linear_speed", fit_linear_speed(times, values, fraction));
    let growth_exponent = keep(&mut notes, "growth_exponent", fit_growth_order(times, values, fraction));
    let tlnt = keep(&mut notes, "tlnt_ratio", tlnt_ratio(times, values, fraction));
    let lag_fit = c0.and_then(|c| keep(&mut notes, "lag_fit", fit_lag(times, values, c, gamma_hint, fraction)));
    Ok(AsymptoticsReport { linear_speed, growth_exponent, tlnt_ratio: tlnt, lag_fit, window, notes })
}

fn keep<T>(notes: &mut Vec<String>, name: &str, r: Result<T, AsymptoticsError>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    }
}
