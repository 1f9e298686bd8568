//! Internal energy, work, heat and entropy production from `K_S(t)`, with
//! the weak-coupling counterparts that use `H_S` instead.
//!
//! Energies are in units of `ω_c`, entropies are dimensionless.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eigenvalues, hermitian_function, trace_product, Op};

/// Eigenvalues of `ρ` are clamped to `[ENTROPY_FLOOR, 1]` inside logarithms.
pub const ENTROPY_FLOOR: f64 = 1e-14;
/// Most negative eigenvalue of `ρ` accepted.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ThermoError {
    #[error("series lengths differ (times {times}, other {other})")]
    GridMismatch { times: usize, other: usize },
    #[error("output grid is not uniform at index {index}")]
    NonUniform { index: usize },
    #[error("need at least 5 grid points, got {0}")]
    TooShort(usize),
    #[error("state has eigenvalue {min:e} at t = {time}")]
    Positivity { time: f64, min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoSeries {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    /// `S(t) − S(0)`.
    pub ds: Vec<f64>,
    /// `Σ_S = ΔS − βQ_S`.
    pub sigma_total: Vec<f64>,
    /// `σ_S = Ṡ − β Tr{K_S ρ̇}`.
    pub sigma_rate: Vec<f64>,
    pub w_w: Vec<f64>,
    pub q_w: Vec<f64>,
    pub sigma_w: Vec<f64>,
    /// Largest imaginary part met in any trace that should be real.
    pub max_imaginary: f64,
}

fn check_grid(times: &[f64], others: &[usize]) -> Result<f64, ThermoError> {
    for &n in others {
        if n != times.len() {
            return Err(ThermoError::GridMismatch {
                times: times.len(),
                other: n,
            });
        }
    }
    if times.len() < 5 {
        return Err(ThermoError::TooShort(times.len()));
    }
    let h = times[1] - times[0];
    for i in 1..times.len() {
        if ((times[i] - times[i - 1]) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(ThermoError::NonUniform { index: i });
        }
    }
    Ok(h)
}

/// Five-point stencil `(first index, weights·12h)` for the derivative at `i`:
/// centered in the interior, one-sided at the two outermost points.
fn stencil(i: usize, n: usize) -> (usize, [f64; 5]) {
    const EDGE: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const NEXT: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    const CENTER: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    let flip = |w: [f64; 5]| [-w[4], -w[3], -w[2], -w[1], -w[0]];
    match i {
        0 => (0, EDGE),
        1 => (0, NEXT),
        _ if i == n - 1 => (n - 5, flip(EDGE)),
        _ if i == n - 2 => (n - 5, flip(NEXT)),
        _ => (i - 2, CENTER),
    }
}

/// Fourth-order finite-difference derivative on a uniform grid
/// (at least five points).
pub fn derivative<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = f.len();
    (0..n)
        .map(|i| {
            let (start, w) = stencil(i, n);
            let acc = (1..5).fold(f[start] * w[0], |acc, k| acc + f[start + k] * w[k]);
            acc * (1.0 / (12.0 * h))
        })
        .collect()
}

/// Cumulative integral from zero by the trapezoid rule with endpoint
/// derivative corrections `h²/12 (f'_i − f'_{i+1})` per panel, which makes
/// each panel exact for cubics.
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let df = derivative(f, h);
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..f.len() {
        acc += 0.5 * h * (f[i - 1] + f[i]) + h * h / 12.0 * (df[i - 1] - df[i]);
        out.push(acc);
    }
    out
}

/// `−Tr{ρ ln ρ}` with the eigenvalue clamp.
pub fn von_neumann_entropy(rho: &Op) -> f64 {
    hermitian_eigenvalues(rho)
        .iter()
        .map(|&l| {
            let l = l.clamp(0.0, 1.0);
            if l <= 0.0 {
                0.0
            } else {
                -l * l.max(ENTROPY_FLOOR).ln()
            }
        })
        .sum()
}

/// `−Tr{ρ̇ ln ρ}`.
pub fn entropy_rate(rho: &Op, rho_dot: &Op) -> f64 {
    let log = hermitian_function(rho, |l| l.clamp(ENTROPY_FLOOR, 1.0).ln());
    -trace_product(rho_dot, &log).re
}

/// Builds the full series. `k_s[i]`, `rho[i]` and `rho_dot[i]` belong to
/// `times[i]`; `h_s` is the (constant) bare system Hamiltonian.
pub fn thermo_series(
    times: &[f64],
    k_s: &[Op],
    rho: &[Op],
    rho_dot: &[Op],
    h_s: &Op,
    beta: f64,
) -> Result<ThermoSeries, ThermoError> {
    let h = check_grid(times, &[k_s.len(), rho.len(), rho_dot.len()])?;
    for (t, r) in times.iter().zip(rho) {
        let [min, _] = hermitian_eigenvalues(r);
        if min < -POSITIVITY_TOLERANCE {
            return Err(ThermoError::Positivity { time: *t, min });
        }
    }
    let mut max_imaginary = 0.0f64;
    let mut real = |z: num_complex::Complex64| {
        max_imaginary = max_imaginary.max(z.im.abs());
        z.re
    };
    let k_dot = op_derivative(k_s, h);
    let u: Vec<f64> = k_s.iter().zip(rho).map(|(k, r)| real(trace_product(k, r))).collect();
    let power: Vec<f64> = k_dot.iter().zip(rho).map(|(kd, r)| real(trace_product(kd, r))).collect();
    let heat_flow: Vec<f64> = k_s.iter().zip(rho_dot).map(|(k, rd)| real(trace_product(k, rd))).collect();
    let heat_flow_w: Vec<f64> = rho_dot.iter().map(|rd| real(trace_product(h_s, rd))).collect();
    let s0 = von_neumann_entropy(&rho[0]);
    let ds: Vec<f64> = rho.iter().map(|r| von_neumann_entropy(r) - s0).collect();
    let s_dot: Vec<f64> = rho.iter().zip(rho_dot).map(|(r, rd)| entropy_rate(r, rd)).collect();
    let w = cumulative_integral(&power, h);
    let q = cumulative_integral(&heat_flow, h);
    let q_w = cumulative_integral(&heat_flow_w, h);
    let sigma_total = ds.iter().zip(&q).map(|(s, q)| entropy_production(*s, *q, beta)).collect();
    let sigma_rate = s_dot.iter().zip(&heat_flow).map(|(s, j)| s - beta * j).collect();
    let sigma_w = s_dot.iter().zip(&heat_flow_w).map(|(s, j)| s - beta * j).collect();
    Ok(ThermoSeries {
        times: times.to_vec(),
        u,
        w,
        q,
        ds,
        sigma_total,
        sigma_rate,
        w_w: vec![0.0; times.len()],
        q_w,
        sigma_w,
        max_imaginary,
    })
}

fn op_derivative(k: &[Op], h: f64) -> Vec<Op> {
    let parts: Vec<[f64; 8]> = k
        .iter()
        .map(|m| {
            let mut p = [0.0; 8];
            for (j, z) in m.iter().enumerate() {
                p[2 * j] = z.re;
                p[2 * j + 1] = z.im;
            }
            p
        })
        .collect();
    let mut d = vec![Op::zeros(); k.len()];
    for comp in 0..8 {
        let series: Vec<f64> = parts.iter().map(|p| p[comp]).collect();
        for (out, v) in d.iter_mut().zip(derivative(&series, h)) {
            let z = &mut out.as_mut_slice()[comp / 2];
            if comp % 2 == 0 {
                z.re = v;
            } else {
                z.im = v;
            }
        }
    }
    d
}

/// `Σ = ΔS − βQ`.
pub fn entropy_production(ds: f64, q: f64, beta: f64) -> f64 {
    ds - beta * q
}

impl ThermoSeries {
    /// `max_t |U(t) − U(0) − W(t) − Q(t)|`.
    pub fn first_law_residual(&self) -> f64 {
        let u0 = self.u[0];
        self.u
            .iter()
            .zip(&self.w)
            .zip(&self.q)
            .map(|((u, w), q)| (u - u0 - w - q).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, commutator, identity, projector, sigma_x, sigma_z, I};

    fn unitary_series(h: &Op, rho0: &Op, n: usize, dt: f64) -> (Vec<f64>, Vec<Op>, Vec<Op>) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let rho: Vec<Op> = times
            .iter()
            .map(|&t| {
                let u = hermitian_function(h, |e| (e * t).cos()) - hermitian_function(h, |e| (e * t).sin()) * I;
                u * rho0 * u.adjoint()
            })
            .collect();
        let rho_dot = rho.iter().map(|r| commutator(h, r) * (-I)).collect();
        (times, rho, rho_dot)
    }

    #[test]
    fn closed_system_has_no_work_or_heat() {
        let h = sigma_x() * c(0.2, 0.0);
        let (times, rho, rho_dot) = unitary_series(&h, &projector("ground").unwrap(), 101, 0.1);
        let k = vec![h; times.len()];
        let th = thermo_series(&times, &k, &rho, &rho_dot, &h, 25.0).unwrap();
        assert!(th.w.iter().all(|w| *w == 0.0));
        assert!(th.q.iter().all(|q| q.abs() < 1e-15));
        assert!(th.u.iter().all(|u| u.abs() < 1e-15));
        assert!(th.ds.iter().all(|s| s.abs() < 1e-12));
        assert!(th.max_imaginary < 1e-15);
    }

    #[test]
    fn entropy_limits() {
        assert_eq!(von_neumann_entropy(&projector("plus").unwrap()), 0.0);
        let mixed = identity() * c(0.5, 0.0);
        assert!((von_neumann_entropy(&mixed) - std::f64::consts::LN_2).abs() < 1e-15);
        // Traceless K on the maximally mixed state.
        assert_eq!(trace_product(&sigma_z(), &mixed).re, 0.0);
    }

    #[test]
    fn first_law_holds_for_a_driven_effective_hamiltonian() {
        // K(t) = cos(0.3 t) σ_z + 0.2 σ_x acting on a decaying state.
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.025).collect();
        let k: Vec<Op> = times
            .iter()
            .map(|&t| sigma_z() * c((0.3 * t).cos(), 0.0) + sigma_x() * c(0.2, 0.0))
            .collect();
        let rho: Vec<Op> = times
            .iter()
            .map(|&t| identity() * c(0.5, 0.0) + sigma_z() * c(0.4 * (-0.2 * t).exp(), 0.0))
            .collect();
        let rho_dot: Vec<Op> = times
            .iter()
            .map(|&t| sigma_z() * c(-0.08 * (-0.2 * t).exp(), 0.0))
            .collect();
        let th = thermo_series(&times, &k, &rho, &rho_dot, &k[0], 2.0).unwrap();
        assert!(th.first_law_residual() < 1e-8 * th.max_abs_u(), "{}", th.first_law_residual());
        for i in 0..times.len() {
            assert_eq!(th.sigma_total[i], th.ds[i] - 2.0 * th.q[i]);
        }
    }

    #[test]
    fn derivative_and_integral_are_fourth_order() {
        let err = |h: f64| {
            let f: Vec<f64> = (0..40).map(|i| (i as f64 * h).sin()).collect();
            let d = derivative(&f, h)
                .iter()
                .enumerate()
                .map(|(i, d)| (d - (i as f64 * h).cos()).abs())
                .fold(0.0, f64::max);
            let q = cumulative_integral(&f, h)
                .iter()
                .enumerate()
                .map(|(i, q)| (q - (1.0 - (i as f64 * h).cos())).abs())
                .fold(0.0, f64::max);
            (d, q)
        };
        let (a, b) = (err(0.04), err(0.02));
        assert!((a.0 / b.0 - 16.0).abs() < 3.0, "{}", a.0 / b.0);
        assert!(a.1 / b.1 > 12.0, "{}", a.1 / b.1);
        let cubic: Vec<f64> = (0..6).map(|i| (i as f64).powi(3)).collect();
        assert!((cumulative_integral(&cubic, 1.0)[5] - 625.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let ops = vec![Op::identity() * c(0.5, 0.0); 5];
        let err = thermo_series(&[0.0, 0.1, 0.3, 0.4, 0.5], &ops, &ops, &ops, &sigma_z(), 1.0).unwrap_err();
        assert_eq!(err, ThermoError::NonUniform { index: 2 });
        let err = thermo_series(&[0.0, 0.1, 0.2, 0.3], &ops, &ops, &ops, &sigma_z(), 1.0).unwrap_err();
        assert!(matches!(err, ThermoError::GridMismatch { .. }));
        let bad = vec![sigma_z() * c(0.6, 0.0) + identity() * c(0.5, 0.0); 5];
        let err = thermo_series(&[0.0, 0.1, 0.2, 0.3, 0.4], &ops, &bad, &ops, &sigma_z(), 1.0).unwrap_err();
        assert!(matches!(err, ThermoError::Positivity { .. }));
    }
}
