//! Adaptive Gauss–Kronrod quadrature and a cycle-summed Fourier integral.
//!
//! The finite-interval routine is a global-subdivision G7/K15 scheme in the
//! style of QUADPACK's QAG. The semi-infinite Fourier routine integrates
//! half-period panels and accelerates the alternating partial sums with
//! Wynn's epsilon algorithm (the QAWF approach).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: estimate {value:e}, estimated error {error:e}")]
    NotConverged { value: f64, error: f64 },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("integral diverges: {0}")]
    Divergent(&'static str),
}

/// Result of a quadrature with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(Estimate, f64), QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite(center));
    }
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite(x2));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    res_asc *= half.abs();
    let value = res_k * half;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (1.0_f64).min((200.0 * error / res_asc).powf(1.5));
    }
    // Roundoff floor from the absolute integrand.
    let floor = 50.0 * f64::EPSILON * (res_abs * half).abs();
    Ok((
        Estimate {
            value,
            error: error.max(floor),
        },
        floor,
    ))
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
    floor: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_panels: 2000,
        }
    }
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate, QuadratureError> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let (first, first_floor) = kronrod15(&f, a, b)?;
    let mut heap = BinaryHeap::new();
    let mut total = first;
    let mut floor = first_floor;
    heap.push(Panel {
        a,
        b,
        est: first,
        floor: first_floor,
    });
    loop {
        let target = tol.abs.max(tol.rel * total.value.abs());
        // Below the roundoff floor no refinement can help.
        if total.error <= target || total.error <= 1.5 * floor {
            return Ok(total);
        }
        if heap.len() >= tol.max_panels {
            return Err(QuadratureError::NotConverged {
                value: total.value,
                error: total.error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval cannot be split further in floating point.
            return Err(QuadratureError::NotConverged {
                value: total.value,
                error: total.error,
            });
        }
        let (left, left_floor) = kronrod15(&f, worst.a, mid)?;
        let (right, right_floor) = kronrod15(&f, mid, worst.b)?;
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        floor += left_floor + right_floor - worst.floor;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            est: left,
            floor: left_floor,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            est: right,
            floor: right_floor,
        });
        // Re-sum periodically to shed accumulated cancellation error.
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(
                Estimate {
                    value: 0.0,
                    error: 0.0,
                },
                |acc, p| Estimate {
                    value: acc.value + p.est.value,
                    error: acc.error + p.est.error,
                },
            );
        }
    }
}

/// Wynn's epsilon extrapolation of a sequence of partial sums.
#[derive(Debug, Default)]
pub struct WynnEpsilon {
    // Last computed diagonal of the epsilon table, even columns only matter.
    table: Vec<f64>,
    sums: Vec<f64>,
}

impl WynnEpsilon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Push the next partial sum and return the current best extrapolated
    /// limit together with a crude error estimate.
    pub fn push(&mut self, s: f64) -> (f64, f64) {
        self.sums.push(s);
        let n = self.sums.len();
        // Rebuild the table from scratch; sequences here are short (< 200).
        let mut prev: Vec<f64> = vec![0.0; n + 1];
        let mut cur: Vec<f64> = self.sums.clone();
        let mut best = s;
        let mut best_err = f64::INFINITY;
        let mut col = 0;
        let mut evens: Vec<f64> = Vec::new();
        while cur.len() > 1 {
            let mut next = Vec::with_capacity(cur.len() - 1);
            for i in 0..cur.len() - 1 {
                let diff = cur[i + 1] - cur[i];
                let p = if col == 0 { 0.0 } else { prev[i + 1] };
                if diff == 0.0 {
                    next.push(f64::INFINITY);
                } else {
                    next.push(p + 1.0 / diff);
                }
            }
            col += 1;
            prev = cur;
            cur = next;
            if col % 2 == 0 {
                if let Some(&last) = cur.last() {
                    if last.is_finite() {
                        evens.push(last);
                    }
                }
            }
            if cur.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        if evens.len() >= 2 {
            let m = evens.len();
            best = evens[m - 1];
            best_err = (evens[m - 1] - evens[m - 2]).abs();
        } else if n >= 2 {
            best_err = (self.sums[n - 1] - self.sums[n - 2]).abs();
        }
        self.table = evens;
        (best, best_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// `∫₀^∞ f(ω) trig(ω t) dω` for `t > 0`, with `f` decaying at least like
/// `1/ω`. The range `[0, start]` is integrated directly, the remainder in
/// half-period panels whose partial sums are extrapolated.
pub fn fourier_integral<F: Fn(f64) -> f64>(
    f: F,
    t: f64,
    trig: Trig,
    start: f64,
    tol: Tolerance,
) -> Result<Estimate, QuadratureError> {
    assert!(t > 0.0, "fourier_integral requires t > 0");
    let period = std::f64::consts::PI / t;
    let g = |w: f64| {
        let (s, c) = (w * t).sin_cos();
        f(w) * match trig {
            Trig::Cos => c,
            Trig::Sin => s,
        }
    };
    // Panels start at a zero of the trig factor past `start`.
    let offset = match trig {
        Trig::Cos => 0.5,
        Trig::Sin => 0.0,
    };
    let k0 = ((start / period) - offset).ceil().max(0.0);
    let mut edge = (k0 + offset) * period;
    if edge <= 0.0 {
        edge = (1.0 + offset) * period;
    }
    let panel_tol = Tolerance {
        abs: tol.abs * 0.1,
        rel: tol.rel * 1e-2,
        max_panels: tol.max_panels,
    };
    let head = integrate(g, 0.0, edge, panel_tol)?;
    let mut sum = head.value;
    let mut err_acc = head.error;
    let mut wynn = WynnEpsilon::new();
    let mut best = Estimate { value: sum, error: f64::INFINITY };
    for k in 0..400 {
        let a = edge + k as f64 * period;
        let panel = integrate(g, a, a + period, panel_tol)?;
        sum += panel.value;
        err_acc += panel.error;
        let (lim, err) = wynn.push(sum);
        if k < 6 {
            continue;
        }
        if err < best.error {
            best = Estimate { value: lim, error: err };
        }
        let target = tol.abs.max(tol.rel * best.value.abs());
        if best.error <= target {
            return Ok(Estimate {
                value: best.value,
                error: best.error.max(err_acc),
            });
        }
    }
    Err(QuadratureError::NotConverged {
        value: best.value,
        error: best.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| x * x * x - 2.0 * x, -1.0, 3.0, Tolerance::default()).unwrap();
        // ∫ x³ − 2x = [x⁴/4 − x²] = (81/4 − 9) − (1/4 − 1) = 12
        assert!((est.value - 12.0).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_converges() {
        // ∫₀¹ 1/(1e-4 + x²) = atan(1/0.01)/0.01
        let exact = (100.0_f64).atan() / 0.01;
        let est = integrate(|x| 1.0 / (1e-4 + x * x), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((est.value - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x| 1.0 / x, 0.0, 1.0, Tolerance::default()).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite(_)));
    }

    #[test]
    fn lorentzian_fourier_transforms() {
        // ∫₀^∞ cos(ωt)/(1+ω²) = (π/2) e^{−t}
        // ∫₀^∞ ω sin(ωt)/(1+ω²) = (π/2) e^{−t}
        for &t in &[0.3, 1.0, 4.0, 15.0] {
            let c = fourier_integral(|w| 1.0 / (1.0 + w * w), t, Trig::Cos, 2.0, Tolerance::default())
                .unwrap();
            let s = fourier_integral(
                |w| w / (1.0 + w * w),
                t,
                Trig::Sin,
                2.0,
                Tolerance::default(),
            )
            .unwrap();
            let exact = 0.5 * PI * (-t).exp();
            assert!((c.value - exact).abs() < 1e-10, "cos t={t}: {} vs {exact}", c.value);
            assert!((s.value - exact).abs() < 1e-9, "sin t={t}: {} vs {exact}", s.value);
        }
    }

    #[test]
    fn wynn_accelerates_alternating_harmonic() {
        let mut w = WynnEpsilon::new();
        let mut s = 0.0;
        let mut out = (0.0, 0.0);
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            out = w.push(s);
        }
        assert!((out.0 - 2f64.ln()).abs() < 1e-10);
    }
}
