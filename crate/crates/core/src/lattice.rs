//! Convolution of piecewise-linear lattice functions with a kernel.
//!
//! A function sampled on `{k·dx}` and interpolated linearly is a sum of hat
//! functions, so `∫ J(x_j - y) u(y) dy = Σ_k w_{j-k} u_k` with
//! `w_k = ∫ J(k·dx - y) hat_0(y) dy`. The weights are computed exactly from
//! the kernel's local moments; they sum to one.

use crate::kernels::Kernel;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Exact hat-function weights `w_k`, `k ≥ 0`, for one kernel and spacing.
#[derive(Debug, Clone)]
pub struct HatWeights {
    kernel: Kernel,
    dx: f64,
    weights: Vec<f64>,
}

impl HatWeights {
    pub fn new(kernel: Kernel, dx: f64) -> Self {
        assert!(dx > 0.0 && dx.is_finite(), "lattice spacing must be positive");
        let mut hw = HatWeights { kernel, dx, weights: Vec::new() };
        hw.ensure(64);
        hw
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Makes weights `0..len` available.
    pub fn ensure(&mut self, len: usize) {
        let dx = self.dx;
        let k = &self.kernel;
        let last_nonzero = (k.trunc_radius() / dx).ceil() + 2.0;
        for i in self.weights.len()..len {
            let w = if i == 0 {
                2.0 * k.falling_ramp_weight(0.0, dx)
            } else if (i as f64) > last_nonzero {
                0.0
            } else {
                let s = i as f64 * dx;
                k.falling_ramp_weight(s, dx) + k.rising_ramp_weight(s - dx, dx)
            };
            self.weights.push(w);
        }
    }

    /// `w_k`; call [`HatWeights::ensure`] first.
    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_{m ≥ n} w_m` in closed form, for `n ≥ 1`.
    pub fn tail_sum(&self, n: usize) -> f64 {
        assert!(n >= 1);
        let s = n as f64 * self.dx;
        self.kernel.tail_mass(s) + self.kernel.rising_ramp_weight(s - self.dx, self.dx)
    }

    /// Weight of a squeezed end cell: the contribution of a node whose
    /// neighbouring segment has width `theta` (instead of `dx`) and sits at
    /// distance `a` from the evaluation point.
    pub fn squeezed(&self, a: f64, theta: f64) -> f64 {
        self.kernel.falling_ramp_weight(a, theta)
    }

    /// Weight of a full-width falling half hat starting `k` cells away.
    pub fn half_hat(&self, k: usize) -> f64 {
        self.kernel.falling_ramp_weight(k as f64 * self.dx, self.dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    /// FFT above [`FFT_THRESHOLD`] nodes, direct below.
    #[default]
    Auto,
    Direct,
    Fft,
}

pub const FFT_THRESHOLD: usize = 192;

struct Spectrum {
    size: usize,
    values: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Symmetric Toeplitz product `y_j = Σ_k w_{|j-k|} x_k` with a cached FFT
/// spectrum of the embedding circulant.
pub struct Convolver {
    weights: HatWeights,
    path: ConvolutionPath,
    spectrum: Option<Spectrum>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("dx", &self.weights.dx)
            .field("path", &self.path)
            .field("fft_size", &self.spectrum.as_ref().map(|s| s.size))
            .finish()
    }
}

impl Clone for Convolver {
    fn clone(&self) -> Self {
        Convolver::new(self.weights.clone(), self.path)
    }
}

impl Convolver {
    pub fn new(weights: HatWeights, path: ConvolutionPath) -> Self {
        Convolver { weights, path, spectrum: None, buffer: Vec::new(), scratch: Vec::new() }
    }

    pub fn weights(&self) -> &HatWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut HatWeights {
        &mut self.weights
    }

    pub fn set_path(&mut self, path: ConvolutionPath) {
        self.path = path;
    }

    /// Writes `Σ_k w_{|j-k|} x_k` into `out[j]`.
    pub fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), out.len());
        let n = x.len();
        if n == 0 {
            return;
        }
        let use_fft = match self.path {
            ConvolutionPath::Direct => false,
            ConvolutionPath::Fft => true,
            ConvolutionPath::Auto => n > FFT_THRESHOLD,
        };
        if use_fft {
            self.apply_fft(x, out);
        } else {
            self.apply_direct(x, out);
        }
    }

    fn apply_direct(&mut self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        self.weights.ensure(n);
        let w = self.weights.as_slice();
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &xk) in x.iter().enumerate() {
                acc += w[j.abs_diff(k)] * xk;
            }
            *o = acc;
        }
    }

    fn apply_fft(&mut self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let size = (2 * n).next_power_of_two();
        if self.spectrum.as_ref().is_none_or(|s| s.size < size) {
            self.build_spectrum(size);
        }
        let spec = self.spectrum.as_ref().expect("spectrum built");
        let size = spec.size;
        self.buffer.clear();
        self.buffer.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        self.buffer.resize(size, Complex64::new(0.0, 0.0));
        let scratch_len = spec.forward.get_inplace_scratch_len().max(spec.inverse.get_inplace_scratch_len());
        self.scratch.resize(scratch_len, Complex64::new(0.0, 0.0));
        spec.forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (b, s) in self.buffer.iter_mut().zip(spec.values.iter()) {
            *b *= s;
        }
        spec.inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = 1.0 / size as f64;
        for (o, b) in out.iter_mut().zip(self.buffer.iter()) {
            *o = b.re * scale;
        }
    }

    fn build_spectrum(&mut self, size: usize) {
        let half = size / 2;
        self.weights.ensure(half + 1);
        let w = self.weights.as_slice();
        let mut values = vec![Complex64::new(0.0, 0.0); size];
        values[0] = Complex64::new(w[0], 0.0);
        for k in 1..half {
            values[k] = Complex64::new(w[k], 0.0);
            values[size - k] = Complex64::new(w[k], 0.0);
        }
        values[half] = Complex64::new(w[half], 0.0);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        forward.process(&mut values);
        self.spectrum = Some(Spectrum { size, values, forward, inverse });
    }
}
