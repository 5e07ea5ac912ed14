//! Dispersal kernels with closed-form tails and moments.
//!
//! Every family is even, continuous, positive at the origin and of unit
//! mass. All integrals that the solvers need (tail masses, local moments on
//! a cell, hat-function weights) are evaluated in closed form so heavy
//! tails are never truncated.

use serde::{Deserialize, Serialize, Serializer};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unknown kernel family `{0}` (expected laplace, gaussian, algebraic or tent)")]
    UnknownFamily(String),
    #[error("kernel parameter for {family} must be {requirement}, got {value}")]
    BadParameter { family: &'static str, requirement: &'static str, value: f64 },
}

/// A nonnegative real that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(f(v)),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }
}

impl std::ops::Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl std::fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `exp(-x²/2s²) / (s√(2π))`
    Gaussian { scale: f64 },
    /// `(r/2) exp(-r|x|)`
    Laplace { rate: f64 },
    /// `(γ-1)/2 · (1+|x|)^-γ`, `γ > 1`
    Algebraic { exponent: f64 },
    /// `(1 - |x|/a)₊ / a`
    Tent { halfwidth: f64 },
}

/// Config form of a kernel: `{"family": "laplace", "param": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    pub param: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    norm_const: f64,
    trunc_radius: f64,
}

/// Outcome of checking a kernel against the integrability conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConditionReport {
    /// Nonnegative, even, continuous, positive at 0, unit mass.
    pub satisfies_j: bool,
    /// Finite first moment.
    pub satisfies_j1: bool,
    /// Finite exponential moment for some λ > 0.
    pub satisfies_j2: bool,
    pub j2_witness: Option<f64>,
    /// Supremum of α with a finite α-th moment.
    pub alpha_star: ExtendedReal,
    /// Algebraic decay exponent, when the family has one.
    pub gamma_tag: Option<f64>,
}

impl Kernel {
    pub fn new(family: KernelFamily) -> Result<Self, KernelError> {
        let (norm_const, trunc_radius) = match family {
            KernelFamily::Gaussian { scale } => {
                check_positive("gaussian", scale)?;
                (1.0 / (scale * (2.0 * PI).sqrt()), 38.6 * scale)
            }
            KernelFamily::Laplace { rate } => {
                check_positive("laplace", rate)?;
                (0.5 * rate, 745.0 / rate)
            }
            KernelFamily::Algebraic { exponent } => {
                if !(exponent > 1.0 && exponent.is_finite()) {
                    return Err(KernelError::BadParameter {
                        family: "algebraic",
                        requirement: "a finite exponent > 1",
                        value: exponent,
                    });
                }
                (0.5 * (exponent - 1.0), f64::INFINITY)
            }
            KernelFamily::Tent { halfwidth } => {
                check_positive("tent", halfwidth)?;
                (1.0 / halfwidth, halfwidth)
            }
        };
        Ok(Kernel { family, norm_const, trunc_radius })
    }

    pub fn laplace(rate: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Laplace { rate })
    }

    pub fn gaussian(scale: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Gaussian { scale })
    }

    pub fn algebraic(exponent: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Algebraic { exponent })
    }

    pub fn tent(halfwidth: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Tent { halfwidth })
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self, KernelError> {
        let p = spec.param;
        match spec.family.as_str() {
            "laplace" => Self::laplace(p),
            "gaussian" => Self::gaussian(p),
            "algebraic" => Self::algebraic(p),
            "tent" => Self::tent(p),
            other => Err(KernelError::UnknownFamily(other.to_string())),
        }
    }

    pub fn spec(&self) -> KernelSpec {
        let (family, param) = match self.family {
            KernelFamily::Gaussian { scale } => ("gaussian", scale),
            KernelFamily::Laplace { rate } => ("laplace", rate),
            KernelFamily::Algebraic { exponent } => ("algebraic", exponent),
            KernelFamily::Tent { halfwidth } => ("tent", halfwidth),
        };
        KernelSpec { family: family.to_string(), param }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// Beyond this radius the kernel is zero in floating point (infinite for
    /// algebraic tails).
    pub fn trunc_radius(&self) -> f64 {
        self.trunc_radius
    }

    /// Length scale used to size validation windows.
    pub fn characteristic_width(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { scale } => scale,
            KernelFamily::Laplace { rate } => 1.0 / rate,
            KernelFamily::Algebraic { .. } => 1.0,
            KernelFamily::Tent { halfwidth } => halfwidth,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let z = x.abs();
        match self.family {
            KernelFamily::Gaussian { scale } => {
                let t = z / scale;
                self.norm_const * (-0.5 * t * t).exp()
            }
            KernelFamily::Laplace { rate } => self.norm_const * (-rate * z).exp(),
            KernelFamily::Algebraic { exponent } => self.norm_const * (1.0 + z).powf(-exponent),
            KernelFamily::Tent { halfwidth } => {
                if z >= halfwidth {
                    0.0
                } else {
                    self.norm_const * (1.0 - z / halfwidth)
                }
            }
        }
    }

    /// `∫_s^∞ J(z) dz`. Negative `s` is allowed and gives `1 - tail_mass(-s)`.
    pub fn tail_mass(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 1.0 - self.tail_mass(-s);
        }
        match self.family {
            KernelFamily::Gaussian { scale } => 0.5 * erfc(s / (scale * SQRT_2)),
            KernelFamily::Laplace { rate } => 0.5 * (-rate * s).exp(),
            KernelFamily::Algebraic { exponent } => 0.5 * (1.0 + s).powf(1.0 - exponent),
            KernelFamily::Tent { halfwidth } => {
                if s >= halfwidth {
                    0.0
                } else {
                    let u = 1.0 - s / halfwidth;
                    0.5 * u * u
                }
            }
        }
    }

    /// `∫_0^∞ x^α J(x) dx`, infinite when the tail makes it diverge.
    pub fn moment(&self, alpha: f64) -> ExtendedReal {
        assert!(alpha >= 0.0, "moment order must be nonnegative");
        match self.family {
            KernelFamily::Gaussian { scale } => ExtendedReal::Finite(
                2f64.powf(0.5 * alpha) * scale.powf(alpha) * gamma(0.5 * (alpha + 1.0))
                    / (2.0 * PI.sqrt()),
            ),
            KernelFamily::Laplace { rate } => {
                ExtendedReal::Finite(0.5 * gamma(alpha + 1.0) / rate.powf(alpha))
            }
            KernelFamily::Algebraic { exponent } => {
                if alpha >= exponent - 1.0 {
                    ExtendedReal::Infinite
                } else {
                    let beta = (ln_gamma(alpha + 1.0) + ln_gamma(exponent - alpha - 1.0)
                        - ln_gamma(exponent))
                    .exp();
                    ExtendedReal::Finite(self.norm_const * beta)
                }
            }
            KernelFamily::Tent { halfwidth } => ExtendedReal::Finite(
                halfwidth.powf(alpha) / ((alpha + 1.0) * (alpha + 2.0)),
            ),
        }
    }

    pub fn classify(&self) -> KernelConditionReport {
        let (j2_witness, alpha_star, gamma_tag) = match self.family {
            KernelFamily::Gaussian { scale } => (Some(1.0 / scale), ExtendedReal::Infinite, None),
            KernelFamily::Laplace { rate } => (Some(0.5 * rate), ExtendedReal::Infinite, None),
            KernelFamily::Tent { halfwidth } => {
                (Some(1.0 / halfwidth), ExtendedReal::Infinite, None)
            }
            KernelFamily::Algebraic { exponent } => {
                (None, ExtendedReal::Finite(exponent - 1.0), Some(exponent))
            }
        };
        KernelConditionReport {
            satisfies_j: self.evaluate(0.0) > 0.0,
            satisfies_j1: self.moment(1.0).is_finite(),
            satisfies_j2: j2_witness.is_some(),
            j2_witness,
            alpha_star,
            gamma_tag,
        }
    }

    /// `∫_0^w r^n J(s0 + r) dr` for `s0 ≥ 0`, `w ≥ 0` (possibly infinite).
    ///
    /// This is the workhorse for cell integrals: it is computed in the local
    /// variable `r` so that narrow cells far out in the tail keep full
    /// relative precision.
    pub fn local_moment(&self, n: u32, s0: f64, w: f64) -> ExtendedReal {
        debug_assert!(s0 >= 0.0 && w >= 0.0);
        if w == 0.0 {
            return ExtendedReal::Finite(0.0);
        }
        match self.family {
            KernelFamily::Laplace { rate } => {
                let pref = 0.5 * (-rate * s0).exp() * factorial(n) / rate.powi(n as i32);
                if w.is_infinite() {
                    ExtendedReal::Finite(pref)
                } else {
                    ExtendedReal::Finite(pref * lower_gamma_regularized(n, rate * w))
                }
            }
            KernelFamily::Algebraic { exponent } => {
                let y0 = 1.0 + s0;
                let pref = self.norm_const * y0.powf(n as f64 + 1.0 - exponent);
                if w.is_infinite() {
                    if exponent <= n as f64 + 1.0 {
                        return ExtendedReal::Infinite;
                    }
                    let beta = (ln_gamma(n as f64 + 1.0) + ln_gamma(exponent - n as f64 - 1.0)
                        - ln_gamma(exponent))
                    .exp();
                    ExtendedReal::Finite(pref * beta)
                } else {
                    ExtendedReal::Finite(pref * power_binomial_integral(n, exponent, w / y0))
                }
            }
            KernelFamily::Gaussian { scale } => {
                ExtendedReal::Finite(gaussian_local_moment(n, s0, w, scale) * self.norm_const * scale)
            }
            KernelFamily::Tent { halfwidth } => {
                let a = halfwidth;
                let wp = w.min(a - s0).max(0.0);
                let n1 = n as f64 + 1.0;
                ExtendedReal::Finite(
                    ((1.0 - s0 / a) * wp.powf(n1) / n1 - wp.powf(n1 + 1.0) / (a * (n1 + 1.0))) / a,
                )
            }
        }
    }

    fn local_finite(&self, n: u32, s0: f64, w: f64) -> f64 {
        self.local_moment(n, s0, w).finite().expect("finite cell width")
    }

    /// `∫_a^b z^n J(z) dz` for any `a ≤ b` (finite).
    pub fn interval_moment(&self, n: u32, a: f64, b: f64) -> f64 {
        assert!(a <= b);
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        if a >= 0.0 {
            self.half_line_moment(n, a, b)
        } else if b <= 0.0 {
            sign * self.half_line_moment(n, -b, -a)
        } else {
            sign * self.half_line_moment(n, 0.0, -a) + self.half_line_moment(n, 0.0, b)
        }
    }

    fn half_line_moment(&self, n: u32, a: f64, b: f64) -> f64 {
        // z^n = Σ C(n,j) a^(n-j) (z-a)^j
        let w = b - a;
        (0..=n)
            .map(|j| binomial(n, j) * a.powi((n - j) as i32) * self.local_finite(j, a, w))
            .sum()
    }

    /// Weight of the half hat `(1 - r/w)` on `[s0, s0+w]`:
    /// `∫_0^w J(s0 + r)(1 - r/w) dr`.
    pub fn falling_ramp_weight(&self, s0: f64, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let k0 = self.local_finite(0, s0, w);
        let k1 = self.local_finite(1, s0, w);
        (k0 - k1 / w).max(0.0)
    }

    /// Weight of the half hat `r/w` on `[s0, s0+w]`: `∫_0^w J(s0 + r) r/w dr`.
    pub fn rising_ramp_weight(&self, s0: f64, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        self.local_finite(1, s0, w) / w
    }

    /// `∫_{s0}^{s0+w} v(s) T(s) ds` where `T` is the tail mass and `v` is
    /// linear with `v(s0) = v0`, `v(s0+w) = v1`. Requires `s0 ≥ 0`.
    pub fn linear_tail_integral(&self, s0: f64, w: f64, v0: f64, v1: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        // ∫_0^w T(s0+r) dr   = w T(s1) + K1
        // ∫_0^w r T(s0+r) dr = w² T(s1)/2 + K2/2
        let t1 = self.tail_mass(s0 + w);
        let k1 = self.local_finite(1, s0, w);
        let k2 = self.local_finite(2, s0, w);
        let i0 = w * t1 + k1;
        let ir = 0.5 * w * w * t1 + 0.5 * k2;
        let slope = (v1 - v0) / w;
        v0 * i0 + slope * ir
    }

    /// `∫_L^∞ T(s) ds = ∫_L^∞ (z - L) J(z) dz`; infinite without a first moment.
    pub fn tail_integral(&self, l: f64) -> ExtendedReal {
        self.local_moment(1, l.max(0.0), f64::INFINITY)
    }

    /// `∫_a^∞ z J(z) dz` for `a ≥ 0`.
    pub fn upper_first_moment(&self, a: f64) -> ExtendedReal {
        self.local_moment(1, a, f64::INFINITY).map(|k1| k1 + a * self.tail_mass(a))
    }
}

fn check_positive(family: &'static str, v: f64) -> Result<(), KernelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KernelError::BadParameter { family, requirement: "a finite positive number", value: v })
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

/// `P(n+1, x) = 1 - e^{-x} Σ_{k≤n} x^k/k!`.
fn lower_gamma_regularized(n: u32, x: f64) -> f64 {
    if x < f64::from(n) + 5.0 {
        // e^{-x} Σ_{k>n} x^k / k!
        let mut term = (1..=n + 1).fold(1.0, |acc, k| acc * x / f64::from(k));
        let mut sum = 0.0_f64;
        let mut k = n + 1;
        while term > 1e-18 * sum.max(f64::MIN_POSITIVE) && k < n + 400 {
            sum += term;
            k += 1;
            term *= x / f64::from(k);
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=n {
            term *= x / f64::from(k);
            sum += term;
        }
        1.0 - (-x).exp() * sum
    }
}

/// `∫_0^ε u^n (1+u)^{-γ} du`.
fn power_binomial_integral(n: u32, gamma_exp: f64, eps: f64) -> f64 {
    if eps <= 0.25 {
        // Σ_j C(-γ, j) ε^{n+j+1} / (n+j+1)
        let mut coeff = 1.0;
        let mut pow = eps.powi(n as i32 + 1);
        let mut sum = 0.0;
        for j in 0..400u32 {
            let term = coeff * pow / f64::from(n + j + 1);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coeff *= (-gamma_exp - f64::from(j)) / f64::from(j + 1);
            pow *= eps;
        }
        sum
    } else {
        // y = 1+u: Σ_j C(n,j) (-1)^{n-j} ∫_1^{1+ε} y^{j-γ} dy
        let y1 = 1.0 + eps;
        (0..=n)
            .map(|j| {
                let sign = if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * binomial(n, j) * power_integral(f64::from(j) - gamma_exp, 1.0, y1)
            })
            .sum()
    }
}

/// `∫_{y0}^{y1} y^p dy` for `0 < y0 ≤ y1`.
fn power_integral(p: f64, y0: f64, y1: f64) -> f64 {
    let q = p + 1.0;
    let ln_ratio = (y1 / y0).ln();
    if q == 0.0 {
        ln_ratio
    } else {
        y0.powf(q) * (q * ln_ratio).exp_m1() / q
    }
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `∫_0^w r^n exp(-(s0+r)²/2s²) dr / s`, composite Gauss–Legendre.
fn gaussian_local_moment(n: u32, s0: f64, w: f64, scale: f64) -> f64 {
    let w = w.min((40.0 * scale - s0).max(0.0));
    if w <= 0.0 {
        return 0.0;
    }
    let pieces = (w / (0.25 * scale)).ceil().max(1.0) as usize;
    let h = w / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let lo = p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut acc = 0.0;
        for (x, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let r = mid + 0.5 * h * x;
            let z = (s0 + r) / scale;
            acc += wt * r.powi(n as i32) * (-0.5 * z * z).exp();
        }
        total += 0.5 * h * acc;
    }
    total / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_to_infinity};

    fn all_kernels() -> Vec<Kernel> {
        vec![
            Kernel::laplace(1.0).unwrap(),
            Kernel::laplace(2.5).unwrap(),
            Kernel::gaussian(1.0).unwrap(),
            Kernel::gaussian(0.3).unwrap(),
            Kernel::algebraic(1.5).unwrap(),
            Kernel::algebraic(2.0).unwrap(),
            Kernel::algebraic(2.5).unwrap(),
            Kernel::algebraic(3.5).unwrap(),
            Kernel::tent(1.0).unwrap(),
            Kernel::tent(3.0).unwrap(),
        ]
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Kernel::laplace(1.0).unwrap().evaluate(0.0), 0.5);
        let alg = Kernel::algebraic(2.0).unwrap();
        // normalisation by quadrature oracle: 1/∫(1+|x|)^-2 = 1/2
        let mass = 2.0 * integrate_to_infinity(|x| (1.0 + x).powi(-2), 0.0, 1e-12).value;
        assert!((alg.evaluate(0.0) - 1.0 / mass).abs() < 1e-10);
        assert!((alg.evaluate(0.0) - 0.5).abs() < 1e-15);
        let g = Kernel::gaussian(1.0).unwrap();
        assert_eq!(g.evaluate(-3.0), g.evaluate(3.0));
    }

    #[test]
    fn unit_mass_and_half_tail() {
        for k in all_kernels() {
            // quadrature over [0, R] plus the closed-form remainder beyond R
            let r = 50.0 * k.characteristic_width();
            let half = integrate(|x| k.evaluate(x), 0.0, r, 1e-12).value + k.tail_mass(r);
            assert!((2.0 * half - 1.0).abs() < 1e-8, "{k:?}: mass {}", 2.0 * half);
            for s in [0.3, 2.0, 7.5] {
                let q = integrate(|x| k.evaluate(x), s, s + r, 1e-12).value + k.tail_mass(s + r);
                assert!((k.tail_mass(s) - q).abs() < 1e-8, "{k:?} s={s}");
            }
            assert_eq!(k.tail_mass(0.0), 0.5);
            assert!((k.moment(0.0).finite().unwrap() - 0.5).abs() < 1e-12, "{k:?}");
        }
    }

    #[test]
    fn tail_mass_examples() {
        let lap = Kernel::laplace(1.0).unwrap();
        let q = integrate_to_infinity(|x| lap.evaluate(x), 2.0, 1e-13).value;
        assert!((lap.tail_mass(2.0) - 0.5 * (-2.0f64).exp()).abs() < 1e-16);
        assert!((lap.tail_mass(2.0) - q).abs() < 1e-11);
        let alg = Kernel::algebraic(2.0).unwrap();
        let q = integrate_to_infinity(|x| alg.evaluate(x), 1.0, 1e-13).value;
        assert!((alg.tail_mass(1.0) - 0.25).abs() < 1e-16);
        assert!((q - 0.25).abs() < 1e-9);
    }

    #[test]
    fn moment_examples() {
        let lap = Kernel::laplace(1.0).unwrap();
        let q = integrate_to_infinity(|x| x * lap.evaluate(x), 0.0, 1e-12).value;
        assert!((lap.moment(1.0).finite().unwrap() - 0.5).abs() < 1e-14);
        assert!((q - 0.5).abs() < 1e-10);
        assert_eq!(Kernel::algebraic(2.0).unwrap().moment(1.0), ExtendedReal::Infinite);
        let g = Kernel::gaussian(0.7).unwrap();
        let q = integrate_to_infinity(|x| x.powf(1.7) * g.evaluate(x), 0.0, 1e-12).value;
        assert!((g.moment(1.7).finite().unwrap() - q).abs() < 1e-10);
        let a = Kernel::algebraic(3.5).unwrap();
        let q = integrate_to_infinity(|x| x.powf(1.2) * a.evaluate(x), 0.0, 1e-12).value;
        assert!((a.moment(1.2).finite().unwrap() - q).abs() < 1e-8);
        let t = Kernel::tent(2.0).unwrap();
        let q = integrate(|x| x.powf(0.5) * t.evaluate(x), 0.0, 2.0, 1e-13).value;
        assert!((t.moment(0.5).finite().unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn classify_examples() {
        let g = Kernel::gaussian(1.0).unwrap().classify();
        assert!(g.satisfies_j1 && g.satisfies_j2);
        assert_eq!(g.alpha_star, ExtendedReal::Infinite);
        let a = Kernel::algebraic(2.5).unwrap().classify();
        assert!(a.satisfies_j1 && !a.satisfies_j2);
        assert_eq!(a.alpha_star, ExtendedReal::Finite(1.5));
        assert_eq!(a.gamma_tag, Some(2.5));
        let a = Kernel::algebraic(1.5).unwrap().classify();
        assert!(!a.satisfies_j1);
        let lap = Kernel::laplace(2.0).unwrap().classify();
        assert_eq!(lap.j2_witness, Some(1.0));
    }

    #[test]
    fn j2_implies_j1_and_algebraic_threshold() {
        for k in all_kernels() {
            let r = k.classify();
            assert!(!r.satisfies_j2 || r.satisfies_j1);
            assert!(r.satisfies_j);
            if let Some(g) = r.gamma_tag {
                assert_eq!(r.satisfies_j1, g > 2.0);
                assert_eq!(r.alpha_star, ExtendedReal::Finite(g - 1.0));
            }
            assert_eq!(k.classify(), r);
        }
    }

    #[test]
    fn local_moments_match_quadrature() {
        for k in all_kernels() {
            for &(s0, w) in &[(0.0, 0.05), (0.0, 1.0), (0.37, 0.05), (3.0, 2.0), (25.0, 0.05), (0.1, 7.0)] {
                for n in 0..3u32 {
                    let exact = k.local_moment(n, s0, w).finite().unwrap();
                    let q = integrate(|r| r.powi(n as i32) * k.evaluate(s0 + r), 0.0, w, 1e-15).value;
                    let scale = q.abs().max(1e-300);
                    assert!(
                        (exact - q).abs() <= 1e-9 * scale + 1e-15,
                        "{k:?} n={n} s0={s0} w={w}: {exact} vs {q}"
                    );
                }
            }
        }
    }

    #[test]
    fn upper_local_moments() {
        for k in all_kernels() {
            for n in 0..3u32 {
                for &s0 in &[0.0, 2.0] {
                    let exact = k.local_moment(n, s0, f64::INFINITY);
                    let q = integrate_to_infinity(|r| r.powi(n as i32) * k.evaluate(s0 + r), 0.0, 1e-12);
                    match exact {
                        ExtendedReal::Finite(v) => {
                            assert!((v - q.value).abs() < 1e-7 * v.max(1.0), "{k:?} n={n}: {v} vs {}", q.value)
                        }
                        ExtendedReal::Infinite => {
                            let KernelFamily::Algebraic { exponent } = k.family() else { panic!() };
                            assert!(exponent <= f64::from(n) + 1.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn linear_tail_integral_matches_quadrature() {
        for k in all_kernels() {
            for &(s0, w, v0, v1) in &[(0.0, 0.05, 0.0, 1.0), (1.3, 0.4, 0.8, 0.2), (40.0, 1.0, 1.0, 1.0)] {
                let exact = k.linear_tail_integral(s0, w, v0, v1);
                let q = integrate(
                    |s| (v0 + (v1 - v0) * (s - s0) / w) * k.tail_mass(s),
                    s0,
                    s0 + w,
                    1e-16,
                )
                .value;
                assert!((exact - q).abs() <= 1e-10 * q.abs() + 1e-16, "{k:?}: {exact} vs {q}");
            }
        }
    }

    #[test]
    fn tail_integrals() {
        let lap = Kernel::laplace(1.0).unwrap();
        assert!((lap.tail_integral(0.0).finite().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(Kernel::algebraic(1.5).unwrap().tail_integral(10.0), ExtendedReal::Infinite);
        let a = Kernel::algebraic(2.5).unwrap();
        // ∫_10^∞ ½(1+s)^-1.5 ds = 11^-0.5
        let exact = 11f64.powf(-0.5);
        assert!((a.tail_integral(10.0).finite().unwrap() - exact).abs() < 1e-13);
        let g = Kernel::gaussian(1.0).unwrap();
        let q = integrate(|s| g.tail_mass(s), 1.0, 40.0, 1e-14).value;
        let got = g.tail_integral(1.0).finite().unwrap();
        assert!((got - q).abs() < 1e-10, "{got} vs {q}");
        // σ[φ(t) - t·Q(t)] at t = 1
        assert!((got - (0.241_970_724_519_143_37 - 0.158_655_253_931_457_05)).abs() < 1e-14);
    }

    #[test]
    fn interval_moment_signed() {
        let k = Kernel::laplace(1.0).unwrap();
        // odd moment over a symmetric interval vanishes
        assert!(k.interval_moment(1, -2.0, 2.0).abs() < 1e-15);
        let q = integrate(|z| z * z * k.evaluate(z), -1.5, 0.7, 1e-14).value;
        assert!((k.interval_moment(2, -1.5, 0.7) - q).abs() < 1e-12);
    }

    #[test]
    fn spec_roundtrip_and_errors() {
        let k = Kernel::from_spec(&KernelSpec { family: "tent".into(), param: 2.0 }).unwrap();
        assert_eq!(k.spec().family, "tent");
        assert!(matches!(
            Kernel::from_spec(&KernelSpec { family: "cauchy".into(), param: 1.0 }),
            Err(KernelError::UnknownFamily(_))
        ));
        assert!(Kernel::algebraic(1.0).is_err());
        assert!(Kernel::laplace(-1.0).is_err());
    }
}
