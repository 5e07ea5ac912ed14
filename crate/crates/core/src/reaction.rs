//! Cooperative reaction terms, their equilibria and structural checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactionError {
    #[error("state has a negative component: {0:?}")]
    Domain(Vec<f64>),
    #[error("matrix is reducible")]
    Reducible,
    #[error("matrix has a negative off-diagonal entry at ({0}, {1})")]
    NotCooperative(usize, usize),
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("equilibrium search converged to the trivial state")]
    TrivialEquilibrium,
    #[error("ODE solution blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("invalid reaction system: {0}")]
    Invalid(String),
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn half() -> f64 {
    0.5
}

/// Built-in reaction terms. Deserialises from `preset = "..."` plus the
/// preset's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReactionModel {
    /// `f(u) = a·u - b·u^p`.
    FisherKpp {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default = "two")]
        p: f64,
    },
    /// Host/vector model:
    /// `(a1(e1-u1)u2 - b1u1, a2(e2-u2)u1 - b2u2)`, capped at `(e1, e2)`.
    WestNile {
        #[serde(default = "one")]
        a1: f64,
        #[serde(default = "one")]
        a2: f64,
        #[serde(default = "half")]
        b1: f64,
        #[serde(default = "half")]
        b2: f64,
        #[serde(default = "one")]
        e1: f64,
        #[serde(default = "one")]
        e2: f64,
    },
    /// `(-a·u1 + c·u2, G(u1) - b·u2)` with `G(z) = g·z / (1 + s·z)`.
    Epidemic {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "two")]
        g: f64,
        #[serde(default = "one")]
        s: f64,
    },
    /// Scalar `f(u) = Σ_k coeffs[k]·u^k`, with an optional cap.
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default)]
        cap: Option<f64>,
    },
}

impl ReactionModel {
    pub fn species(&self) -> usize {
        match self {
            ReactionModel::FisherKpp { .. } | ReactionModel::Polynomial { .. } => 1,
            ReactionModel::WestNile { .. } | ReactionModel::Epidemic { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReactionModel::FisherKpp { .. } => "fisher-kpp",
            ReactionModel::WestNile { .. } => "west-nile",
            ReactionModel::Epidemic { .. } => "epidemic",
            ReactionModel::Polynomial { .. } => "polynomial",
        }
    }

    /// Preset defaults for diffusion rates and front coefficients.
    pub fn default_rates(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ReactionModel::FisherKpp { .. } | ReactionModel::Polynomial { .. } => (vec![1.0], vec![1.0]),
            // only the vector population drives the fronts
            ReactionModel::WestNile { .. } => (vec![1.0, 1.0], vec![0.0, 1.0]),
            ReactionModel::Epidemic { .. } => (vec![1.0, 0.0], vec![1.0, 0.0]),
        }
    }

    fn validate(&self) -> Result<(), ReactionError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ReactionError::Invalid(format!("parameter {name} must be positive, got {v}")))
            }
        };
        match *self {
            ReactionModel::FisherKpp { a, b, p } => {
                positive("a", a)?;
                positive("b", b)?;
                if !(p > 1.0 && p.is_finite()) {
                    return Err(ReactionError::Invalid(format!("exponent p must exceed 1, got {p}")));
                }
            }
            ReactionModel::WestNile { a1, a2, b1, b2, e1, e2 } => {
                for (n, v) in [("a1", a1), ("a2", a2), ("b1", b1), ("b2", b2), ("e1", e1), ("e2", e2)] {
                    positive(n, v)?;
                }
            }
            ReactionModel::Epidemic { a, b, c, g, s } => {
                for (n, v) in [("a", a), ("b", b), ("c", c), ("g", g), ("s", s)] {
                    positive(n, v)?;
                }
            }
            ReactionModel::Polynomial { ref coeffs, cap } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(ReactionError::Invalid("polynomial coefficients must be finite".into()));
                }
                if let Some(c) = cap {
                    positive("cap", c)?;
                }
            }
        }
        Ok(())
    }

    /// Writes `F(u)` into `out` without domain checks.
    #[inline]
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        match *self {
            ReactionModel::FisherKpp { a, b, p } => {
                let v = u[0];
                out[0] = if p == 2.0 { a * v - b * v * v } else { a * v - b * v.abs().powf(p) * v.signum() };
            }
            ReactionModel::WestNile { a1, a2, b1, b2, e1, e2 } => {
                out[0] = a1 * (e1 - u[0]) * u[1] - b1 * u[0];
                out[1] = a2 * (e2 - u[1]) * u[0] - b2 * u[1];
            }
            ReactionModel::Epidemic { a, b, c, g, s } => {
                out[0] = -a * u[0] + c * u[1];
                out[1] = g * u[0] / (1.0 + s * u[0]) - b * u[1];
            }
            ReactionModel::Polynomial { ref coeffs, .. } => {
                out[0] = coeffs.iter().rev().fold(0.0, |acc, &c| acc * u[0] + c);
            }
        }
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        match *self {
            ReactionModel::FisherKpp { a, b, p } => {
                DMatrix::from_element(1, 1, a - b * p * u[0].abs().powf(p - 1.0))
            }
            ReactionModel::WestNile { a1, a2, b1, b2, e1, e2 } => DMatrix::from_row_slice(
                2,
                2,
                &[-a1 * u[1] - b1, a1 * (e1 - u[0]), a2 * (e2 - u[1]), -a2 * u[0] - b2],
            ),
            ReactionModel::Epidemic { a, b, c, g, s } => {
                let q = 1.0 + s * u[0];
                DMatrix::from_row_slice(2, 2, &[-a, c, g / (q * q), -b])
            }
            ReactionModel::Polynomial { ref coeffs, .. } => {
                let d = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &c)| acc * u[0] + k as f64 * c);
                DMatrix::from_element(1, 1, d)
            }
        }
    }

    fn cap(&self) -> Option<Vec<f64>> {
        match *self {
            ReactionModel::WestNile { e1, e2, .. } => Some(vec![e1, e2]),
            ReactionModel::Polynomial { cap, .. } => cap.map(|c| vec![c]),
            _ => None,
        }
    }

    /// Positive equilibrium in closed form, when the preset has one.
    fn closed_form_equilibrium(&self) -> Option<Vec<f64>> {
        match *self {
            ReactionModel::FisherKpp { a, b, p } => Some(vec![(a / b).powf(1.0 / (p - 1.0))]),
            ReactionModel::WestNile { a1, a2, b1, b2, e1, e2 } => {
                let num = a1 * a2 * e1 * e2 - b1 * b2;
                Some(vec![num / (a1 * a2 * e2 + a2 * b1), num / (a1 * a2 * e1 + a1 * b2)])
            }
            ReactionModel::Epidemic { a, b, c, g, s } => {
                let k1 = (g * c / (a * b) - 1.0) / s;
                Some(vec![k1, g * k1 / ((1.0 + s * k1) * b)])
            }
            ReactionModel::Polynomial { .. } => None,
        }
    }
}

/// Equilibrium formula for the host/vector preset exactly as it is usually
/// printed, `(a1a2 - e1e2 - b1b2)/…`. Kept to document that it is not a root
/// of the vector field; the solver uses `(a1a2e1e2 - b1b2)/…`.
pub fn west_nile_printed_equilibrium(a1: f64, a2: f64, b1: f64, b2: f64, e1: f64, e2: f64) -> [f64; 2] {
    let num = a1 * a2 - e1 * e2 - b1 * b2;
    [num / (a1 * a2 * e2 + a2 * b1), num / (a1 * a2 * e1 + a1 * b2)]
}

/// A reaction model together with the per-species transport data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionSystem {
    pub model: ReactionModel,
    pub m: usize,
    /// Species `0..m0` diffuse and may drive the fronts.
    pub m0: usize,
    pub d: Vec<f64>,
    pub mu: Vec<f64>,
    pub u_star: Vec<f64>,
    /// Componentwise cap; `None` means unbounded.
    pub u_hat: Option<Vec<f64>>,
    /// Sampled Lipschitz bound of `F` over the sampling box.
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
}

impl ReactionSystem {
    pub fn new(model: ReactionModel, d: Vec<f64>, mu: Vec<f64>) -> Result<Self, ReactionError> {
        model.validate()?;
        let m = model.species();
        if d.len() != m || mu.len() != m {
            return Err(ReactionError::Invalid(format!(
                "expected {m} diffusion rates and front coefficients, got {} and {}",
                d.len(),
                mu.len()
            )));
        }
        if d.iter().chain(mu.iter()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ReactionError::Invalid("diffusion rates and front coefficients must be nonnegative".into()));
        }
        let m0 = d.iter().take_while(|&&v| v > 0.0).count();
        if m0 == 0 {
            return Err(ReactionError::Invalid("the first species must diffuse (d[0] > 0)".into()));
        }
        if d[m0..].iter().any(|&v| v > 0.0) {
            return Err(ReactionError::Invalid("diffusing species must come first".into()));
        }
        if mu[m0..].iter().any(|&v| v > 0.0) {
            return Err(ReactionError::Invalid("front coefficients must vanish for non-diffusing species".into()));
        }
        if mu.iter().sum::<f64>() <= 0.0 {
            return Err(ReactionError::Invalid("front coefficients must have a positive sum".into()));
        }
        let u_hat = model.cap();
        let mut sys = ReactionSystem { model, m, m0, d, mu, u_star: vec![0.0; m], u_hat, lipschitz: 0.0 };
        sys.u_star = sys.find_equilibrium()?;
        sys.lipschitz = sys.estimate_lipschitz(512, 0x5eed);
        Ok(sys)
    }

    /// Preset with its default rates.
    pub fn preset(model: ReactionModel) -> Result<Self, ReactionError> {
        let (d, mu) = model.default_rates();
        Self::new(model, d, mu)
    }

    pub fn fisher_kpp(a: f64, b: f64, p: f64) -> Result<Self, ReactionError> {
        Self::preset(ReactionModel::FisherKpp { a, b, p })
    }

    pub fn logistic() -> Self {
        Self::fisher_kpp(1.0, 1.0, 2.0).expect("logistic preset is valid")
    }

    pub fn west_nile_default() -> Self {
        Self::preset(ReactionModel::WestNile { a1: 1.0, a2: 1.0, b1: 0.5, b2: 0.5, e1: 1.0, e2: 1.0 })
            .expect("west-nile preset is valid")
    }

    pub fn epidemic_default() -> Self {
        Self::preset(ReactionModel::Epidemic { a: 1.0, b: 1.0, c: 1.0, g: 2.0, s: 1.0 })
            .expect("epidemic preset is valid")
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<Vec<f64>, ReactionError> {
        self.check_domain(u)?;
        let mut out = vec![0.0; self.m];
        self.model.eval_into(u, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        self.model.eval_into(u, out);
    }

    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>, ReactionError> {
        self.check_domain(u)?;
        Ok(self.model.jacobian(u))
    }

    /// Central finite-difference Jacobian.
    pub fn jacobian_fd(&self, u: &[f64], step: f64) -> DMatrix<f64> {
        let m = self.m;
        let mut jac = DMatrix::zeros(m, m);
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for j in 0..m {
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j] += step;
            um[j] -= step;
            self.model.eval_into(&up, &mut plus);
            self.model.eval_into(&um, &mut minus);
            for i in 0..m {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
            }
        }
        jac
    }

    fn check_domain(&self, u: &[f64]) -> Result<(), ReactionError> {
        if u.len() != self.m {
            return Err(ReactionError::Invalid(format!("state has {} components, expected {}", u.len(), self.m)));
        }
        if u.iter().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(ReactionError::Domain(u.to_vec()));
        }
        Ok(())
    }

    /// Upper corner of the sampling box: `u_hat ∧ (u* + 1)`.
    pub fn sampling_box(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                let top = self.u_star[i] + 1.0;
                match &self.u_hat {
                    Some(h) => top.min(h[i]),
                    None => top,
                }
            })
            .collect()
    }

    /// Largest component of `max(u_hat, u*)`, ignoring infinite caps.
    pub fn scale(&self) -> f64 {
        let star = self.u_star.iter().cloned().fold(0.0, f64::max);
        match &self.u_hat {
            Some(h) => h.iter().cloned().fold(star, f64::max),
            None => star,
        }
    }

    fn estimate_lipschitz(&self, samples: usize, seed: u64) -> f64 {
        let top = self.sampling_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        let mut probe = |u: &[f64]| {
            let j = self.model.jacobian(u);
            best = best.max(matrix_one_norm(&j));
        };
        probe(&vec![0.0; self.m]);
        probe(&top);
        probe(&self.u_star);
        for _ in 0..samples {
            let u: Vec<f64> = top.iter().map(|&t| rng.random::<f64>() * t).collect();
            probe(&u);
        }
        best
    }

    pub fn find_equilibrium(&self) -> Result<Vec<f64>, ReactionError> {
        let guess = self.model.closed_form_equilibrium();
        let root = match guess {
            Some(g) if g.iter().all(|&v| v > 0.0 && v.is_finite()) => {
                // polish the closed form against the vector field
                newton(&self.model, &g, 50).unwrap_or(g)
            }
            Some(_) => return Err(ReactionError::TrivialEquilibrium),
            None => self.search_equilibrium()?,
        };
        let mut f = vec![0.0; self.m];
        self.model.eval_into(&root, &mut f);
        let norm = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if norm >= 1e-10 {
            return Err(ReactionError::NoConvergence { what: "equilibrium search", iterations: 200 });
        }
        if root.iter().any(|&v| v <= 1e-12) {
            return Err(ReactionError::TrivialEquilibrium);
        }
        Ok(root)
    }

    fn search_equilibrium(&self) -> Result<Vec<f64>, ReactionError> {
        let eps = 1e-3;
        let starts: Vec<Vec<f64>> = match &self.u_hat {
            Some(h) => vec![h.iter().map(|&v| 0.5 * (eps + v)).collect(), h.clone()],
            None => [0.5, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|&s| vec![s; self.m]).collect(),
        };
        let mut trivial = false;
        for s in starts {
            if let Some(root) = newton(&self.model, &s, 200) {
                if root.iter().all(|&v| v > 1e-8) {
                    return Ok(root);
                }
                trivial = true;
            }
        }
        if trivial {
            Err(ReactionError::TrivialEquilibrium)
        } else {
            Err(ReactionError::NoConvergence { what: "equilibrium search", iterations: 200 })
        }
    }

    pub fn principal_eigenpair_at_zero(&self) -> Result<EigenPair, ReactionError> {
        principal_eigenpair(&self.model.jacobian(&vec![0.0; self.m]))
    }

    /// RK4 for `W' = F(W)`; the last step is shortened to land on `t_final`.
    pub fn solve_ode(&self, w0: &[f64], t_final: f64, dt: f64) -> Result<OdeTrajectory, ReactionError> {
        self.check_domain(w0)?;
        if !(dt > 0.0) || !(t_final >= 0.0) {
            return Err(ReactionError::Invalid("time step and horizon must be positive".into()));
        }
        let bound = 10.0 * w0.iter().cloned().fold(self.scale(), f64::max);
        let m = self.m;
        let mut times = vec![0.0];
        let mut states = vec![w0.to_vec()];
        let mut w = w0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut tmp = vec![0.0; m];
        let steps = (t_final / dt).ceil() as usize;
        for n in 0..steps {
            let t0 = n as f64 * dt;
            let h = (t_final - t0).min(dt);
            self.model.eval_into(&w, &mut k1);
            axpy(&w, 0.5 * h, &k1, &mut tmp);
            self.model.eval_into(&tmp, &mut k2);
            axpy(&w, 0.5 * h, &k2, &mut tmp);
            self.model.eval_into(&tmp, &mut k3);
            axpy(&w, h, &k3, &mut tmp);
            self.model.eval_into(&tmp, &mut k4);
            for i in 0..m {
                w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t = if n + 1 == steps { t_final } else { t0 + h };
            if w.iter().any(|v| !v.is_finite() || v.abs() > bound) {
                return Err(ReactionError::BlowUp { t });
            }
            times.push(t);
            states.push(w.clone());
        }
        Ok(OdeTrajectory { times, states })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdeTrajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = x[i] + a * y[i];
    }
}

fn matrix_one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Damped Newton iteration; `None` if it stalls or leaves the positive cone.
fn newton(model: &ReactionModel, start: &[f64], max_iter: usize) -> Option<Vec<f64>> {
    let m = start.len();
    let mut u = start.to_vec();
    let mut f = vec![0.0; m];
    let mut trial_f = vec![0.0; m];
    model.eval_into(&u, &mut f);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..max_iter {
        let res = norm(&f);
        if res < 1e-14 {
            return Some(u);
        }
        let jac = model.jacobian(&u);
        let rhs = nalgebra::DVector::from_iterator(m, f.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = (0..m).map(|i| (u[i] + lambda * step[i]).max(0.0)).collect();
            model.eval_into(&trial, &mut trial_f);
            if norm(&trial_f) < (1.0 - 1e-4 * lambda) * res || lambda < 1e-6 {
                u = trial;
                std::mem::swap(&mut f, &mut trial_f);
                break;
            }
            lambda *= 0.5;
        }
        if step.iter().map(|v| v.abs()).fold(0.0, f64::max) * lambda < 1e-16 {
            break;
        }
    }
    (norm(&f) < 1e-11).then_some(u)
}

/// Principal eigenpair of a cooperative irreducible matrix by power
/// iteration on `A + σI`, `σ = max|a_ii| + 1`.
pub fn principal_eigenpair(a: &DMatrix<f64>) -> Result<EigenPair, ReactionError> {
    let m = a.nrows();
    assert_eq!(m, a.ncols(), "matrix must be square");
    for i in 0..m {
        for j in 0..m {
            if i != j && a[(i, j)] < 0.0 {
                return Err(ReactionError::NotCooperative(i, j));
            }
        }
    }
    if !is_irreducible(a) {
        return Err(ReactionError::Reducible);
    }
    let sigma = (0..m).map(|i| a[(i, i)].abs()).fold(0.0, f64::max) + 1.0;
    let shifted = a + DMatrix::identity(m, m) * sigma;
    let (rho, theta) = power_iteration(&shifted)?;
    let (_, theta_tilde) = power_iteration(&shifted.transpose())?;
    Ok(EigenPair { lambda1: rho - sigma, theta, theta_tilde })
}

fn power_iteration(b: &DMatrix<f64>) -> Result<(f64, Vec<f64>), ReactionError> {
    let m = b.nrows();
    let mut v = nalgebra::DVector::from_element(m, 1.0);
    const CAP: usize = 100_000;
    for _ in 0..CAP {
        let w = b * &v;
        let scale = w.iter().cloned().fold(0.0, f64::max);
        let next = w / scale;
        let change = (&next - &v).amax();
        v = next;
        if change < 1e-15 {
            let bv = b * &v;
            let imax = v.iamax();
            return Ok((bv[imax] / v[imax], v.iter().cloned().collect()));
        }
    }
    Err(ReactionError::NoConvergence { what: "power iteration", iterations: CAP })
}

/// Irreducibility of the nonzero pattern: every index reaches every other.
pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    let m = a.nrows();
    if m == 1 {
        return a[(0, 0)] != 0.0;
    }
    let reach_all = |transpose: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let entry = if transpose { a[(j, i)] } else { a[(i, j)] };
                if !seen[j] && i != j && entry != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach_all(false) && reach_all(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub counterexample: Option<Vec<f64>>,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(detail: impl Into<String>) -> Self {
        CheckOutcome { passed: true, counterexample: None, detail: detail.into() }
    }

    fn fail(point: Option<Vec<f64>>, detail: impl Into<String>) -> Self {
        CheckOutcome { passed: false, counterexample: point, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub seed: u64,
    pub sample_count: usize,
    /// Only `0` and `u*` are roots in the positive cone.
    pub two_roots: CheckOutcome,
    /// Nonnegative off-diagonal Jacobian entries.
    pub cooperative: CheckOutcome,
    /// Irreducible linearisation at 0 with positive principal eigenvalue.
    pub unstable_zero: CheckOutcome,
    pub principal_eigenvalue: Option<f64>,
    /// Non-diffusing species are fed by diffusing ones.
    pub coupling: CheckOutcome,
    /// `F(ku) ≥ k F(u)` for `k ∈ [0, 1]`.
    pub subhomogeneous: CheckOutcome,
    /// Invertible, nonpositive linearisation at `u*`.
    pub stable_equilibrium: CheckOutcome,
    /// ODE trajectories from several initial data reach `u*`.
    pub attracting_empirical: bool,
    /// `F(v) - v[∇F(v)]ᵀ ≻≻ 0` on `(0, u*]`.
    pub strictly_subhomogeneous: CheckOutcome,
    pub lipschitz: f64,
    /// Observations that do not fail a check.
    pub notes: Vec<String>,
}

impl AssumptionReport {
    /// All structural assumptions, including the empirical attractivity flag.
    pub fn all_passed(&self) -> bool {
        self.two_roots.passed
            && self.cooperative.passed
            && self.unstable_zero.passed
            && self.coupling.passed
            && self.subhomogeneous.passed
            && self.stable_equilibrium.passed
            && self.attracting_empirical
    }
}

pub fn verify_assumptions(sys: &ReactionSystem, sample_count: usize, seed: u64) -> AssumptionReport {
    let sample_count = sample_count.max(100);
    let m = sys.m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = sys.sampling_box();
    let sample_box = |rng: &mut ChaCha8Rng, hi: &[f64]| -> Vec<f64> { hi.iter().map(|&t| rng.random::<f64>() * t).collect() };
    let mut f = vec![0.0; m];
    let scale = sys.scale().max(1.0);

    // roots
    let two_roots = {
        let mut outcome = CheckOutcome::pass("Newton from sampled starts found only 0 and u*");
        sys.eval_into(&vec![0.0; m], &mut f);
        if f.iter().any(|v| v.abs() > 1e-10) {
            outcome = CheckOutcome::fail(Some(vec![0.0; m]), "F(0) is not zero");
        }
        sys.eval_into(&sys.u_star, &mut f);
        if f.iter().any(|v| v.abs() > 1e-10) {
            outcome = CheckOutcome::fail(Some(sys.u_star.clone()), "F(u*) is not zero");
        }
        let starts = (sample_count / 4).max(25);
        for _ in 0..starts {
            if !outcome.passed {
                break;
            }
            let s = sample_box(&mut rng, &top);
            if let Some(root) = newton(&sys.model, &s, 100) {
                let near = |p: &[f64]| p.iter().zip(&root).all(|(a, b)| (a - b).abs() < 1e-6 * scale);
                if !near(&vec![0.0; m]) && !near(&sys.u_star) {
                    outcome = CheckOutcome::fail(Some(root), "additional root in the positive cone");
                }
            }
        }
        // a sign scan catches roots Newton may skip in the scalar case
        if outcome.passed && m == 1 {
            let n = sample_count * 4;
            let mut prev: Option<(f64, f64)> = None;
            for k in 1..=n {
                let u = top[0] * k as f64 / n as f64;
                sys.eval_into(&[u], &mut f);
                if let Some((pu, pf)) = prev {
                    if pf * f[0] < 0.0 && (pu - sys.u_star[0]).abs() > 1e-9 && (u - sys.u_star[0]).abs() > 1e-9 {
                        let mid = bisect_scalar(sys, pu, u);
                        if (mid - sys.u_star[0]).abs() > 1e-6 * scale {
                            outcome = CheckOutcome::fail(Some(vec![mid]), "additional root in the positive cone");
                            break;
                        }
                    }
                }
                prev = Some((u, f[0]));
            }
        }
        outcome
    };

    // cooperativity
    let cooperative = {
        let mut outcome = CheckOutcome::pass(format!("{sample_count} sampled Jacobians"));
        for n in 0..sample_count {
            let u = if n == 0 { top.clone() } else { sample_box(&mut rng, &top) };
            let j = sys.model.jacobian(&u);
            if let Some((r, c)) = off_diagonal_violation(&j) {
                outcome = CheckOutcome::fail(Some(u), format!("∂{c} f{r} < 0"));
                break;
            }
        }
        outcome
    };

    // linearisation at zero
    let (unstable_zero, principal_eigenvalue) = match sys.principal_eigenpair_at_zero() {
        Ok(ep) if ep.lambda1 > 0.0 => {
            (CheckOutcome::pass(format!("principal eigenvalue {:.6e}", ep.lambda1)), Some(ep.lambda1))
        }
        Ok(ep) => (
            CheckOutcome::fail(Some(vec![0.0; m]), format!("principal eigenvalue {:.6e} is not positive", ep.lambda1)),
            Some(ep.lambda1),
        ),
        Err(e) => (CheckOutcome::fail(Some(vec![0.0; m]), e.to_string()), None),
    };

    // coupling of non-diffusing species
    let coupling = if sys.m0 == m {
        CheckOutcome::pass("all species diffuse")
    } else {
        let mut outcome = CheckOutcome::pass(format!("{sample_count} samples in [0, u*]"));
        'outer: for n in 0..sample_count {
            let u = if n == 0 { vec![0.0; m] } else { sample_box(&mut rng, &sys.u_star) };
            let jac = sys.model.jacobian(&u);
            for i in sys.m0..m {
                for j in 0..sys.m0 {
                    if jac[(i, j)] <= 0.0 {
                        outcome = CheckOutcome::fail(Some(u), format!("∂{j} f{i} is not positive"));
                        break 'outer;
                    }
                }
            }
        }
        outcome
    };

    // subhomogeneity
    let subhomogeneous = {
        let mut outcome = CheckOutcome::pass(format!("{sample_count} sampled (k, u) pairs"));
        let mut fk = vec![0.0; m];
        for _ in 0..sample_count {
            let u = sample_box(&mut rng, &top);
            let k: f64 = rng.random();
            let ku: Vec<f64> = u.iter().map(|v| k * v).collect();
            sys.eval_into(&ku, &mut fk);
            sys.eval_into(&u, &mut f);
            if (0..m).any(|i| fk[i] - k * f[i] < -1e-12 * scale) {
                outcome = CheckOutcome::fail(Some(u), format!("F(ku) < kF(u) at k = {k:.4}"));
                break;
            }
        }
        outcome
    };

    let stable_equilibrium = check_stable_equilibrium(sys, &mut rng);
    let attracting_empirical = check_attractivity(sys, &mut rng);

    // strengthened subhomogeneity
    let strictly_subhomogeneous = {
        let mut outcome = CheckOutcome::pass(format!("{sample_count} samples in (0, u*]"));
        for n in 0..sample_count {
            let v: Vec<f64> = if n == 0 {
                sys.u_star.clone()
            } else {
                sys.u_star.iter().map(|&s| s * (1e-3 + (1.0 - 1e-3) * rng.random::<f64>())).collect()
            };
            sys.eval_into(&v, &mut f);
            let jac = sys.model.jacobian(&v);
            let bad = (0..m).find(|&i| {
                let lin: f64 = (0..m).map(|j| jac[(i, j)] * v[j]).sum();
                f[i] - lin <= 0.0
            });
            if let Some(i) = bad {
                outcome = CheckOutcome::fail(Some(v), format!("component {i} is not positive"));
                break;
            }
        }
        outcome
    };

    let mut notes = Vec::new();
    if let ReactionModel::WestNile { a1, a2, b1, b2, e1, e2 } = sys.model {
        let printed = west_nile_printed_equilibrium(a1, a2, b1, b2, e1, e2);
        let mut g = vec![0.0; m];
        sys.eval_into(&printed, &mut g);
        let miss = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if miss > 1e-10 {
            notes.push(format!(
                "the closed-form equilibrium with numerator a1a2 - e1e2 - b1b2 gives {printed:?} with |F| = {miss:.3e}; \
                 using the Newton root {:?} instead",
                sys.u_star
            ));
        }
    }
    AssumptionReport {
        notes,
        seed,
        sample_count,
        two_roots,
        cooperative,
        unstable_zero,
        principal_eigenvalue,
        coupling,
        subhomogeneous,
        stable_equilibrium,
        attracting_empirical,
        strictly_subhomogeneous,
        lipschitz: sys.lipschitz,
    }
}

fn bisect_scalar(sys: &ReactionSystem, mut lo: f64, mut hi: f64) -> f64 {
    let mut f = [0.0];
    sys.eval_into(&[lo], &mut f);
    let flo = f[0];
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        sys.eval_into(&[mid], &mut f);
        if f[0] * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn off_diagonal_violation(j: &DMatrix<f64>) -> Option<(usize, usize)> {
    let m = j.nrows();
    (0..m).flat_map(|r| (0..m).map(move |c| (r, c))).find(|&(r, c)| r != c && j[(r, c)] < -1e-12)
}

fn check_stable_equilibrium(sys: &ReactionSystem, rng: &mut ChaCha8Rng) -> CheckOutcome {
    let m = sys.m;
    let us = &sys.u_star;
    let jac = sys.model.jacobian(us);
    let det = jac.clone().lu().determinant();
    let jscale = matrix_one_norm(&jac).max(1e-300);
    if det.abs() <= 1e-12 * jscale.powi(m as i32) {
        return CheckOutcome::fail(Some(us.clone()), "∇F(u*) is singular");
    }
    // row sums Σ_j ∂_j f_i(u*) u*_j
    let tol = 1e-10 * jscale * us.iter().cloned().fold(0.0, f64::max);
    let mut f = vec![0.0; m];
    for i in 0..m {
        let s: f64 = (0..m).map(|j| jac[(i, j)] * us[j]).sum();
        if s > tol {
            return CheckOutcome::fail(Some(us.clone()), format!("row {i} of [u*]∇F(u*) is positive"));
        }
        if s.abs() <= tol {
            // needs f_i linear just below u*
            let eps0 = 0.05 * us.iter().cloned().fold(f64::INFINITY, f64::min);
            for _ in 0..64 {
                let v: Vec<f64> = us.iter().map(|&u| u - eps0 * rng.random::<f64>()).collect();
                sys.eval_into(&v, &mut f);
                let lin: f64 = (0..m).map(|j| jac[(i, j)] * (v[j] - us[j])).sum();
                if (f[i] - lin).abs() > 1e-10 * sys.scale().max(1.0) {
                    return CheckOutcome::fail(Some(v), format!("row {i} vanishes but f{i} is not linear near u*"));
                }
            }
        }
    }
    CheckOutcome::pass(format!("det ∇F(u*) = {det:.6e}"))
}

fn check_attractivity(sys: &ReactionSystem, rng: &mut ChaCha8Rng) -> bool {
    let top = sys.sampling_box();
    let mut starts: Vec<Vec<f64>> = vec![
        sys.u_star.iter().map(|v| 0.01 * v).collect(),
        sys.u_star.iter().map(|v| 0.5 * v).collect(),
        top.clone(),
    ];
    for _ in 0..3 {
        starts.push(top.iter().map(|&t| (0.05 + 0.95 * rng.random::<f64>()) * t).collect());
    }
    starts.iter().all(|w0| match sys.solve_ode(w0, 200.0, 0.01) {
        Ok(traj) => traj.last().iter().zip(&sys.u_star).all(|(w, u)| (w - u).abs() < 1e-4),
        Err(_) => false,
    })
}
