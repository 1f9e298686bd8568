//! Reference solutions used to validate the hierarchy: the independent-boson
//! (pure dephasing) closed form and a second-order time-convolutionless
//! master equation whose kernel comes straight from the spectral integral.
//!
//! Nothing here touches the exponential decompositions or the hierarchy.

use rayon::prelude::*;

use crate::bath::{oracle_tolerance, oscillation_start, symmetric_density, BathError, BathSpec};
use crate::linalg::{c, commutator, sigma_x, sigma_z, Op, C64, I};
use crate::quadrature::{fourier_integral, integrate, Trig};

/// `J(ω)/π` for the Debye density.
fn density_over_pi(w: f64, spec: &BathSpec) -> f64 {
    let wc2 = spec.omega_c * spec.omega_c;
    0.5 * spec.alpha * w * wc2 / (w * w + wc2)
}

/// Semi-infinite tail `∫_A^∞ f(w) dw` via `w = A/s`.
fn tail_integral<F: Fn(f64) -> f64>(f: F, a: f64) -> Result<f64, BathError> {
    Ok(integrate(|s| f(a / s) * a / (s * s), 0.0, 1.0, oracle_tolerance())?.value)
}

/// `∫_A^∞ p(w) e^{iσwt} dw` for smooth decaying `p`, σ = ±1.
fn tail_fourier<F: Fn(f64) -> f64>(p: F, a: f64, t: f64, sign: f64) -> Result<C64, BathError> {
    let shifted = |u: f64| p(a + u);
    let cos = fourier_integral(shifted, t, Trig::Cos, 0.0, oracle_tolerance())?.value;
    let sin = fourier_integral(shifted, t, Trig::Sin, 0.0, oracle_tolerance())?.value;
    let phase = C64::from_polar(1.0, sign * a * t);
    Ok(phase * c(cos, sign * sin))
}

/// Decoherence function `Γ(t) = 4 ∫₀^∞ dω (J coth(βω/2)/π) (1 − cos ωt)/ω²`.
pub fn decoherence_function(t: f64, spec: &BathSpec) -> Result<f64, BathError> {
    if t < 0.0 || t.is_nan() {
        return Err(BathError::NegativeTime(t));
    }
    if t == 0.0 || spec.alpha == 0.0 {
        return Ok(0.0);
    }
    let a = oscillation_start(spec);
    // 1 − cos ωt written as 2 sin²(ωt/2) to keep the ω → 0 limit clean.
    let head = integrate(
        |w| {
            let s = (0.5 * w * t).sin();
            let damp = if w == 0.0 { 0.5 * t * t } else { 2.0 * s * s / (w * w) };
            symmetric_density(w, spec) * damp
        },
        0.0,
        a,
        oracle_tolerance(),
    )?
    .value;
    let flat = tail_integral(|w| symmetric_density(w, spec) / (w * w), a)?;
    let osc = tail_fourier(|w| symmetric_density(w, spec) / (w * w), a, t, 1.0)?.re;
    Ok(4.0 * (head + flat - osc))
}

/// `Γ(t)` on a time grid together with the free phase `2εt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingSolution {
    pub times: Vec<f64>,
    pub gamma: Vec<f64>,
    pub epsilon: f64,
}

impl DephasingSolution {
    pub fn on_grid(spec: &BathSpec, epsilon: f64, times: &[f64]) -> Result<Self, BathError> {
        let gamma = times
            .par_iter()
            .map(|&t| decoherence_function(t, spec))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            times: times.to_vec(),
            gamma,
            epsilon,
        })
    }

    /// `ρ₀₁(t_i)` for the given initial coherence.
    pub fn coherence(&self, i: usize, rho01: C64) -> C64 {
        rho01 * C64::from_polar((-self.gamma[i]).exp(), 2.0 * self.epsilon * self.times[i])
    }
}

/// Off-diagonal element of the pure-dephasing solution for
/// `H_S = −ε σ_z`: `ρ₀₁(t) = ρ₀₁(0) e^{2iεt} e^{−Γ(t)}`.
pub fn dephasing_coherence(t: f64, spec: &BathSpec, epsilon: f64, rho01: C64) -> Result<C64, BathError> {
    let gamma = decoherence_function(t, spec)?;
    Ok(rho01 * C64::from_polar((-gamma).exp(), 2.0 * epsilon * t))
}

/// `∫₀^t e^{ixs} ds` split into real and imaginary parts.
fn phase_integral(x: f64, t: f64) -> (f64, f64) {
    if (x * t).abs() < 1e-10 {
        return (t, 0.5 * x * t * t);
    }
    let s = (0.5 * x * t).sin();
    ((x * t).sin() / x, 2.0 * s * s / x)
}

/// `G(ν, t) = ∫₀^t C(s) e^{iνs} ds` with the time integral done analytically
/// inside the spectral integral.
pub fn kernel_integral(nu: f64, t: f64, spec: &BathSpec) -> Result<C64, BathError> {
    if t < 0.0 || t.is_nan() {
        return Err(BathError::NegativeTime(t));
    }
    if t == 0.0 || spec.alpha == 0.0 {
        return Ok(c(0.0, 0.0));
    }
    // J(n+1)/π and Jn/π, combined with ∫ e^{i(ν∓ω)s}.
    let lower = |w: f64| 0.5 * (symmetric_density(w, spec) + density_over_pi(w, spec));
    let upper = |w: f64| 0.5 * (symmetric_density(w, spec) - density_over_pi(w, spec));
    let a = oscillation_start(spec).max(2.0 * nu.abs() + spec.omega_c);
    let head = |part: usize| {
        integrate(
            |w| {
                let (pr, pi) = phase_integral(nu + w, t);
                let (mr, mi) = phase_integral(nu - w, t);
                if part == 0 {
                    upper(w) * pr + lower(w) * mr
                } else {
                    upper(w) * pi + lower(w) * mi
                }
            },
            0.0,
            a,
            oracle_tolerance(),
        )
    };
    let mut g = c(head(0)?.value, head(1)?.value);
    // Beyond A: ∫ e^{ixs} = (i − i e^{ixt})/x with x = ν ± ω ≠ 0.
    let flat = tail_integral(|w| upper(w) / (nu + w) + lower(w) / (nu - w), a)?;
    g += I * flat;
    let up = tail_fourier(|w| upper(w) / (nu + w), a, t, 1.0)? * C64::from_polar(1.0, nu * t);
    let down = tail_fourier(|w| lower(w) / (nu - w), a, t, -1.0)? * C64::from_polar(1.0, nu * t);
    g -= I * (up + down);
    Ok(g)
}

/// Reduced density matrices of a second-order TCL run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tcl2Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<Op>,
}

/// Propagates `dρ/dt = −i[H_S, ρ] − [σ_z, Λ(t)ρ − ρΛ(t)†]` with
/// `Λ(t) = ∫₀^t C(s) σ_z(−s) ds`, `H_S = −ε σ_z + Δ σ_x`, by classical RK4
/// with step `dt`, recording every `stride` steps.
pub fn tcl2_propagate(
    epsilon: f64,
    delta: f64,
    spec: &BathSpec,
    rho0: Op,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<Tcl2Trajectory, BathError> {
    assert!(dt > 0.0 && stride > 0);
    let h = sigma_x() * c(delta, 0.0) - sigma_z() * c(epsilon, 0.0);
    let omega = (epsilon * epsilon + delta * delta).sqrt();
    // σ_z(−s) = Σ_{jk} P_j σ_z P_k e^{−i(E_j − E_k)s}.
    let blocks: Vec<(f64, Op)> = if omega == 0.0 {
        vec![(0.0, sigma_z())]
    } else {
        let half = c(0.5, 0.0);
        let proj = [
            (omega, (Op::identity() + h * c(1.0 / omega, 0.0)) * half),
            (-omega, (Op::identity() - h * c(1.0 / omega, 0.0)) * half),
        ];
        let mut out = Vec::new();
        for (ej, pj) in &proj {
            for (ek, pk) in &proj {
                out.push((ek - ej, pj * sigma_z() * pk));
            }
        }
        out
    };
    let n_steps = (t_final / dt).round() as usize;
    let half_grid: Vec<f64> = (0..=2 * n_steps).map(|k| 0.5 * dt * k as f64).collect();
    let lambda: Vec<Op> = half_grid
        .par_iter()
        .map(|&t| {
            let mut acc = Op::zeros();
            for (nu, block) in &blocks {
                acc += block * kernel_integral(*nu, t, spec)?;
            }
            Ok(acc)
        })
        .collect::<Result<_, BathError>>()?;

    let z = sigma_z();
    let rhs = |rho: &Op, lam: &Op| -> Op {
        commutator(&h, rho) * (-I) - commutator(&z, &(lam * rho - rho * lam.adjoint()))
    };
    let mut rho = rho0;
    let mut times = vec![0.0];
    let mut states = vec![rho];
    let dtc = c(dt, 0.0);
    let half = c(0.5 * dt, 0.0);
    for step in 0..n_steps {
        let (l0, lm, l1) = (&lambda[2 * step], &lambda[2 * step + 1], &lambda[2 * step + 2]);
        let k1 = rhs(&rho, l0);
        let k2 = rhs(&(rho + k1 * half), lm);
        let k3 = rhs(&(rho + k2 * half), lm);
        let k4 = rhs(&(rho + k3 * dtc), l1);
        rho += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
        if (step + 1) % stride == 0 {
            times.push((step + 1) as f64 * dt);
            states.push(rho);
        }
    }
    Ok(Tcl2Trajectory { times, rho: states })
}

/// Trace norm of a Hermitian 2×2 difference.
pub fn trace_distance_norm(a: &Op) -> f64 {
    let h = (a + a.adjoint()) * c(0.5, 0.0);
    let tr = (h[(0, 0)] + h[(1, 1)]).re;
    let d = 0.5 * (h[(0, 0)] - h[(1, 1)]).re;
    let off = h[(0, 1)].norm();
    let r = (d * d + off * off).sqrt();
    (0.5 * tr + r).abs() + (0.5 * tr - r).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::correlation_quadrature;
    use crate::linalg::projector;

    fn spec() -> BathSpec {
        BathSpec::new(0.3, 1.0, 25.0).unwrap()
    }

    #[test]
    fn decoherence_starts_at_zero_and_grows() {
        let s = spec();
        assert_eq!(decoherence_function(0.0, &s).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in 1..=40 {
            let g = decoherence_function(0.25 * k as f64, &s).unwrap();
            assert!(g >= prev, "Γ decreased at t = {}", 0.25 * k as f64);
            prev = g;
        }
    }

    #[test]
    fn decoherence_short_time_is_quadratic() {
        // Γ(t) ≈ 2 t² ∫₀^∞ J coth/π dω diverges logarithmically for Debye,
        // so compare against the double time integral of Re C instead.
        let s = spec();
        let t = 1.0;
        let n = 400;
        // Γ(t) = 4 ∫₀^t (t − u) Re C(u) du; Re C has a log singularity at 0,
        // so the midpoint rule converges slowly but steadily.
        let h = t / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let u = (k as f64 + 0.5) * h;
            acc += (t - u) * correlation_quadrature(u, &s).unwrap().re * h;
        }
        let g = decoherence_function(t, &s).unwrap();
        assert!((4.0 * acc - g).abs() / g < 2e-3, "{} vs {g}", 4.0 * acc);
    }

    #[test]
    fn decoupled_bath_gives_free_phase() {
        let s = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        let z = dephasing_coherence(3.0, &s, 0.5, c(0.5, 0.0)).unwrap();
        assert!((z - C64::from_polar(0.5, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn kernel_derivative_matches_correlation() {
        let s = spec();
        for &(nu, t) in &[(0.0, 1.0), (0.4, 2.5), (-1.2, 7.0)] {
            let h = 1e-3;
            let d = (kernel_integral(nu, t + h, &s).unwrap() - kernel_integral(nu, t - h, &s).unwrap())
                / c(2.0 * h, 0.0);
            let expect = correlation_quadrature(t, &s).unwrap() * C64::from_polar(1.0, nu * t);
            assert!((d - expect).norm() < 1e-6, "ν={nu} t={t}: {d} vs {expect}");
        }
    }

    #[test]
    fn tcl2_is_exact_for_pure_dephasing() {
        let s = BathSpec::new(0.05, 1.0, 25.0).unwrap();
        let eps = 0.5;
        let traj = tcl2_propagate(eps, 0.0, &s, projector("plus").unwrap(), 0.005, 5.0, 200).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.rho) {
            let exact = dephasing_coherence(*t, &s, eps, c(0.5, 0.0)).unwrap();
            // Λ̇ = C(t) σ_z is log-singular at t = 0, which costs RK4 its
            // order on the first steps; the residual shrinks only linearly in dt.
            assert!((rho[(0, 1)] - exact).norm() < 1e-7, "t={t}: {} vs {exact}", rho[(0, 1)]);
            assert!((rho[(0, 0)].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn tcl2_decoupled_is_rabi() {
        let s = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        let traj = tcl2_propagate(0.0, 0.2, &s, projector("ground").unwrap(), 0.02, 20.0, 25).unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.rho) {
            let sz = (rho[(0, 0)] - rho[(1, 1)]).re;
            assert!((sz - (0.4 * t).cos()).abs() < 1e-8, "t={t}: {sz}");
        }
    }

    #[test]
    fn trace_norm_of_pauli() {
        assert!((trace_distance_norm(&sigma_x()) - 2.0).abs() < 1e-15);
        assert!((trace_distance_norm(&(Op::identity() * c(0.3, 0.0))) - 0.6).abs() < 1e-15);
    }
}
