//! Adaptive Gauss–Kronrod (G7/K15) quadrature.
//!
//! Used on validation paths only: production code integrates kernels in
//! closed form. Semi-infinite ranges are mapped onto `[0, 1)`.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Subdivision is global: the interval with the largest error estimate is
/// bisected until the summed estimate drops below `tol` or `max_intervals`
/// is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    integrate_with_limit(f, a, b, tol, 4000)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0, evaluations: 0 };
    }
    let (value, error) = kronrod(&f, a, b);
    let mut intervals = vec![(a, b, value, error)];
    let mut evaluations = 15;
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if total_err <= tol || intervals.len() >= max_intervals {
            break;
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, iv)| if iv.3 > acc.1 { (i, iv.3) } else { acc });
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Cannot split further in floating point.
            intervals.push((lo, hi, kronrod(&f, lo, hi).0, 0.0));
            continue;
        }
        let (v1, e1) = kronrod(&f, lo, mid);
        let (v2, e2) = kronrod(&f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // Sum small contributions first.
    intervals.sort_by(|p, q| p.2.abs().total_cmp(&q.2.abs()));
    let value = intervals.iter().map(|iv| iv.2).sum();
    let error = intervals.iter().map(|iv| iv.3).sum();
    Quadrature { value, error, evaluations }
}

/// Integrates `f` over `[a, ∞)` via the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Quadrature {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let x = a + t / s;
        let v = f(x) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_with_limit(g, 0.0, 1.0, tol, 20_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-12);
        assert!((q.value - 13.5).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn exponential_tail() {
        let q = integrate_to_infinity(|x| (-x).exp(), 2.0, 1e-12);
        assert!((q.value - (-2.0f64).exp()).abs() < 1e-11, "{q:?}");
    }

    #[test]
    fn kinked_integrand() {
        let q = integrate(|x: f64| x.abs(), -1.0, 3.0, 1e-12);
        assert!((q.value - 5.0).abs() < 1e-11);
    }

    #[test]
    fn algebraic_tail() {
        // ∫_1^∞ (1+x)^-2.5 dx = 2^-1.5 / 1.5
        let q = integrate_to_infinity(|x| (1.0 + x).powf(-2.5), 1.0, 1e-12);
        let exact = 2f64.powf(-1.5) / 1.5;
        assert!((q.value - exact).abs() < 1e-10, "{} vs {exact}", q.value);
    }
}
