//! Debye bath: spectral density, correlation function and its exponential
//! decompositions.
//!
//! Conventions: `J(ω) = (π/2) α ω ω_c² / (ω² + ω_c²)` and
//! `C(t) = ∫₀^∞ dω J(ω)/π [coth(βω/2) cos ωt − i sin ωt]`. Both
//! decompositions are obtained by closing the contour of
//! `(1/π) ∫ J(ω) f(βω) e^{−iωt}` in the lower half plane, where `f` is the
//! Bose function `1/(1 − e^{−x})` or a pole expansion of it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, C64};
use crate::quadrature::{self, fourier_integral, Estimate, QuadratureError, Tolerance, Trig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("invalid bath parameters: {0}")]
    InvalidSpec(String),
    #[error("spectral density requested at negative frequency {0}")]
    NegativeFrequency(f64),
    #[error("correlation function requested at negative time {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("Padé eigenvalue problem of size {0} did not converge")]
    EigenNotConverged(usize),
    #[error("Bose pole at rate {rate} coincides with the Debye pole")]
    DegeneratePole { rate: f64 },
    #[error("decomposition needs at least one pole")]
    NoPoles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub alpha: f64,
    pub omega_c: f64,
    pub beta: f64,
}

impl BathSpec {
    pub fn new(alpha: f64, omega_c: f64, beta: f64) -> Result<Self, BathError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(BathError::InvalidSpec(format!("alpha = {alpha} must be ≥ 0")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(BathError::InvalidSpec(format!("omega_c = {omega_c} must be > 0")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(BathError::InvalidSpec(format!("beta = {beta} must be > 0")));
        }
        Ok(Self { alpha, omega_c, beta })
    }

    /// `α ω_c² / 2`, the amplitude of the `1/ω` tail of `J/π`.
    fn tail_amplitude(&self) -> f64 {
        0.5 * self.alpha * self.omega_c * self.omega_c
    }
}

/// Debye spectral density.
pub fn spectral_density(omega: f64, spec: &BathSpec) -> Result<f64, BathError> {
    if omega < 0.0 || omega.is_nan() {
        return Err(BathError::NegativeFrequency(omega));
    }
    let wc2 = spec.omega_c * spec.omega_c;
    Ok(0.5 * PI * spec.alpha * omega * wc2 / (omega * omega + wc2))
}

/// `ω coth(βω/2)`, continuous through `ω = 0`.
pub(crate) fn omega_coth(omega: f64, beta: f64) -> f64 {
    let x = 0.5 * beta * omega;
    if x.abs() < 1e-8 {
        2.0 / beta * (1.0 + x * x / 3.0)
    } else {
        omega / x.tanh()
    }
}

/// `J(ω) coth(βω/2) / π`, finite at `ω = 0` where it equals `α/β`.
pub(crate) fn symmetric_density(omega: f64, spec: &BathSpec) -> f64 {
    let wc2 = spec.omega_c * spec.omega_c;
    0.5 * spec.alpha * wc2 / (omega * omega + wc2) * omega_coth(omega, spec.beta)
}

/// Frequency beyond which the bath integrands are smooth and monotone.
pub(crate) fn oscillation_start(spec: &BathSpec) -> f64 {
    4.0 * spec.omega_c + 40.0 / spec.beta
}

pub(crate) fn oracle_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-14,
        rel: 1e-11,
        max_panels: 4000,
    }
}

/// `Re C(t)` by quadrature. Diverges logarithmically as `t → 0` for `α > 0`.
pub fn correlation_real_quadrature(t: f64, spec: &BathSpec) -> Result<Estimate, BathError> {
    if t < 0.0 || t.is_nan() {
        return Err(BathError::NegativeTime(t));
    }
    if spec.alpha == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if t == 0.0 {
        return Err(QuadratureError::Divergent(
            "Re C(0) diverges logarithmically for the Debye density",
        )
        .into());
    }
    Ok(fourier_integral(
        |w| symmetric_density(w, spec),
        t,
        Trig::Cos,
        oscillation_start(spec),
        oracle_tolerance(),
    )?)
}

/// `Im C(t) = −∫ J(ω)/π sin ωt dω` by quadrature; exactly zero at `t = 0`.
pub fn correlation_imag_quadrature(t: f64, spec: &BathSpec) -> Result<Estimate, BathError> {
    if t < 0.0 || t.is_nan() {
        return Err(BathError::NegativeTime(t));
    }
    if spec.alpha == 0.0 || t == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let amp = spec.tail_amplitude();
    let wc2 = spec.omega_c * spec.omega_c;
    let est = fourier_integral(
        |w| amp * w / (w * w + wc2),
        t,
        Trig::Sin,
        oscillation_start(spec),
        oracle_tolerance(),
    )?;
    Ok(Estimate { value: -est.value, error: est.error })
}

/// Bath correlation function by adaptive quadrature (`t > 0` when `α > 0`).
pub fn correlation_quadrature(t: f64, spec: &BathSpec) -> Result<C64, BathError> {
    let re = correlation_real_quadrature(t, spec)?;
    let im = correlation_imag_quadrature(t, spec)?;
    Ok(c(re.value, im.value))
}

/// One exponential `η e^{−γ t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathTerm {
    pub eta: Complex64,
    pub gamma: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Pade,
    Matsubara,
}

/// Exponential-sum representation of `C(t)`; the Debye pole comes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathDecomposition {
    pub scheme: Scheme,
    pub n_pade: usize,
    pub terms: Vec<BathTerm>,
}

impl BathDecomposition {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, t: f64) -> C64 {
        self.terms.iter().map(|term| term.eta * (-term.gamma * t).exp()).sum()
    }

    /// `Σ η_l`, the `t → 0⁺` limit of the reconstruction.
    pub fn weight_sum(&self) -> C64 {
        self.terms.iter().map(|term| term.eta).sum()
    }

    pub fn all_decaying(&self) -> bool {
        self.terms.iter().all(|term| term.gamma.re > 0.0)
    }
}

/// Poles `ξ_j` and residues `η_j` of a pole expansion of the Bose function,
/// `f(x) ≈ 1/x + 1/2 + Σ_j 2 η_j x / (x² + ξ_j²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BosePoles {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl BosePoles {
    /// `[N−1/N]` Padé poles from the continued fraction of `coth`.
    pub fn pade(n: usize) -> Result<Self, BathError> {
        if n == 0 {
            return Err(BathError::NoPoles);
        }
        let b = |m: usize| (2 * m + 1) as f64;
        let xi = positive_inverse_eigs(2 * n, |m| 1.0 / (b(m) * b(m + 1)).sqrt())?;
        let zeta = positive_inverse_eigs(2 * n - 1, |m| 1.0 / (b(m + 1) * b(m + 2)).sqrt())?;
        debug_assert_eq!(xi.len(), n);
        debug_assert_eq!(zeta.len(), n - 1);
        let prefactor = 0.5 * n as f64 * b(n + 1);
        let eta = (0..n)
            .map(|j| {
                let xj2 = xi[j] * xi[j];
                let others = (0..n).filter(|&k| k != j).map(|k| xi[k] * xi[k] - xj2);
                zeta.iter()
                    .map(|z| z * z - xj2)
                    .zip(others)
                    .fold(prefactor, |acc, (num, den)| acc * num / den)
            })
            .collect();
        Ok(Self { xi, eta })
    }

    pub fn matsubara(n: usize) -> Self {
        Self {
            xi: (1..=n).map(|k| 2.0 * PI * k as f64).collect(),
            eta: vec![1.0; n],
        }
    }

    /// The expansion at complex argument.
    pub fn bose(&self, x: C64) -> C64 {
        let mut f = x.inv() + 0.5;
        for (xi, eta) in self.xi.iter().zip(&self.eta) {
            f += 2.0 * eta * x / (x * x + xi * xi);
        }
        f
    }
}

/// `2/λ` for the positive eigenvalues `λ` of the zero-diagonal symmetric
/// tridiagonal matrix with the given off-diagonal (1-based row index),
/// sorted ascending.
fn positive_inverse_eigs<F: Fn(usize) -> f64>(size: usize, off: F) -> Result<Vec<f64>, BathError> {
    if size == 1 {
        return Ok(Vec::new());
    }
    let mut m = DMatrix::<f64>::zeros(size, size);
    for i in 0..size - 1 {
        let v = off(i + 1);
        m[(i, i + 1)] = v;
        m[(i + 1, i)] = v;
    }
    let eig = SymmetricEigen::try_new(m, 1e-15, 10_000).ok_or(BathError::EigenNotConverged(size))?;
    let scale = eig.eigenvalues.amax();
    let mut out: Vec<f64> = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-10 * scale)
        .map(|l| 2.0 / l)
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Residue sum for a given pole expansion; `debye_bose` is the Bose factor
/// used for the Debye pole `f(−iβω_c)`.
fn decompose(
    spec: &BathSpec,
    poles: &BosePoles,
    debye_bose: C64,
    scheme: Scheme,
) -> Result<BathDecomposition, BathError> {
    let wc = spec.omega_c;
    let wc2 = wc * wc;
    let a = spec.alpha;
    let mut terms = Vec::with_capacity(poles.xi.len() + 1);
    // −2πi · (1/π) · Res_{ω=−iω_c} J(ω) f(βω)
    terms.push(BathTerm {
        eta: c(0.0, -0.5 * PI * a * wc2) * debye_bose,
        gamma: c(wc, 0.0),
    });
    for (xi, eta) in poles.xi.iter().zip(&poles.eta) {
        let nu = xi / spec.beta;
        let gap = nu * nu - wc2;
        if gap.abs() <= 1e-12 * wc2 {
            return Err(BathError::DegeneratePole { rate: nu });
        }
        terms.push(BathTerm {
            eta: c(PI * a * wc2 * eta / spec.beta * nu / gap, 0.0),
            gamma: c(nu, 0.0),
        });
    }
    Ok(BathDecomposition {
        scheme,
        n_pade: poles.xi.len(),
        terms,
    })
}

/// Debye pole plus `n_pade` Padé poles of the Bose function. The Debye
/// residue uses the same Padé approximant so that near-coincident poles
/// cancel consistently.
pub fn pade_decomposition(spec: &BathSpec, n_pade: usize) -> Result<BathDecomposition, BathError> {
    let poles = BosePoles::pade(n_pade)?;
    let debye = poles.bose(c(0.0, -spec.beta * spec.omega_c));
    decompose(spec, &poles, debye, Scheme::Pade)
}

/// Debye pole (exact Bose factor) plus the first `n_terms` Matsubara poles.
pub fn matsubara_decomposition(spec: &BathSpec, n_terms: usize) -> Result<BathDecomposition, BathError> {
    if n_terms == 0 {
        return Err(BathError::NoPoles);
    }
    let poles = BosePoles::matsubara(n_terms);
    let y = spec.beta * spec.omega_c;
    let debye = c(0.5, 0.5 / (0.5 * y).tan());
    decompose(spec, &poles, debye, Scheme::Matsubara)
}

/// Largest deviation `|Σ η e^{−γt} − C(t)|` on `points` uniformly spaced
/// times in `[t_min, t_max]`, with the quadrature values supplied by the
/// caller so they can be reused across decompositions.
pub fn reconstruction_error(decomp: &BathDecomposition, reference: &[(f64, C64)]) -> f64 {
    reference
        .iter()
        .map(|&(t, exact)| (decomp.evaluate(t) - exact).norm())
        .fold(0.0, f64::max)
}

/// Quadrature values of `C(t)` on a uniform grid, for reconstruction checks.
pub fn quadrature_reference(
    spec: &BathSpec,
    t_min: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<(f64, C64)>, BathError> {
    let step = if points > 1 { (t_max - t_min) / (points - 1) as f64 } else { 0.0 };
    (0..points)
        .map(|i| {
            let t = t_min + step * i as f64;
            correlation_quadrature(t, spec).map(|v| (t, v))
        })
        .collect()
}

/// Independent finite-range integral used by tests: `∫_a^b J(ω)/π coth(βω/2) dω`.
pub fn symmetric_density_integral(spec: &BathSpec, a: f64, b: f64) -> Result<f64, BathError> {
    Ok(quadrature::integrate(|w| symmetric_density(w, spec), a, b, oracle_tolerance())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_bath() -> BathSpec {
        BathSpec::new(0.3, 1.0, 25.0).unwrap()
    }

    #[test]
    fn spectral_density_values() {
        let spec = reference_bath();
        assert_eq!(spectral_density(0.0, &spec).unwrap(), 0.0);
        let at_wc = spectral_density(1.0, &spec).unwrap();
        assert!((at_wc - 0.075 * PI).abs() < 1e-15);
        let decoupled = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        assert_eq!(spectral_density(3.7, &decoupled).unwrap(), 0.0);
        assert!(matches!(
            spectral_density(-1.0, &spec),
            Err(BathError::NegativeFrequency(_))
        ));
    }

    #[test]
    fn spectral_density_peak() {
        let spec = BathSpec::new(0.7, 2.0, 5.0).unwrap();
        let peak = spectral_density(2.0, &spec).unwrap();
        assert!((peak - 0.25 * PI * 0.7 * 2.0).abs() < 1e-14);
        for &w in &[0.5, 1.9, 2.1, 10.0] {
            let j = spectral_density(w, &spec).unwrap();
            assert!(j >= 0.0 && j < peak);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(BathSpec::new(-0.1, 1.0, 1.0).is_err());
        assert!(BathSpec::new(0.1, 0.0, 1.0).is_err());
        assert!(BathSpec::new(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn correlation_edge_cases() {
        let spec = reference_bath();
        assert_eq!(correlation_imag_quadrature(0.0, &spec).unwrap().value, 0.0);
        assert!(matches!(
            correlation_real_quadrature(0.0, &spec),
            Err(BathError::Quadrature(QuadratureError::Divergent(_)))
        ));
        let decoupled = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        for &t in &[0.0, 0.5, 7.0] {
            assert_eq!(correlation_quadrature(t, &decoupled).unwrap(), c(0.0, 0.0));
        }
        assert!(matches!(
            correlation_quadrature(-1.0, &spec),
            Err(BathError::NegativeTime(_))
        ));
    }

    #[test]
    fn imaginary_part_matches_closed_form() {
        // −(α ω_c²/2) ∫ ω sin ωt/(ω²+ω_c²) = −(π/4) α ω_c² e^{−ω_c t}
        let spec = BathSpec::new(0.3, 1.5, 25.0).unwrap();
        for &t in &[0.2, 1.0, 5.0] {
            let im = correlation_imag_quadrature(t, &spec).unwrap().value;
            let exact = -0.25 * PI * 0.3 * 2.25 * (-1.5 * t).exp();
            assert!((im - exact).abs() < 1e-10, "t={t}: {im} vs {exact}");
        }
    }

    #[test]
    fn pade_single_pole_closed_form() {
        // Truncating the coth continued fraction after 3, 5 gives 5x/(x²+60).
        let p = BosePoles::pade(1).unwrap();
        assert!((p.xi[0] - 60f64.sqrt()).abs() < 1e-12);
        assert!((p.eta[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn pade_approximates_bose_function() {
        let exact = |x: f64| 1.0 / (1.0 - (-x).exp());
        let mut prev = f64::INFINITY;
        for &n in &[2usize, 4, 8, 16] {
            let p = BosePoles::pade(n).unwrap();
            let err = (1..=200)
                .map(|i| {
                    let x = 0.1 * i as f64;
                    (p.bose(c(x, 0.0)).re - exact(x)).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < prev, "n={n}: error {err} did not decrease from {prev}");
            prev = err;
        }
        assert!(prev < 1e-12, "16-pole error {prev}");
    }

    #[test]
    fn pade_low_poles_approach_matsubara() {
        let p = BosePoles::pade(20).unwrap();
        for k in 0..5 {
            assert!((p.xi[k] - 2.0 * PI * (k + 1) as f64).abs() < 1e-8, "{:?}", p.xi[k]);
            assert!((p.eta[k] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn decompositions_decay_and_vanish_without_coupling() {
        let spec = reference_bath();
        for d in [pade_decomposition(&spec, 6).unwrap(), matsubara_decomposition(&spec, 6).unwrap()] {
            assert!(d.all_decaying());
            assert_eq!(d.len(), 7);
            assert_eq!(d.terms[0].gamma, c(1.0, 0.0));
        }
        let decoupled = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        for d in [
            pade_decomposition(&decoupled, 4).unwrap(),
            matsubara_decomposition(&decoupled, 4).unwrap(),
        ] {
            assert!(d.terms.iter().all(|t| t.eta == c(0.0, 0.0) || t.eta.norm() == 0.0));
        }
        assert!(matches!(pade_decomposition(&spec, 0), Err(BathError::NoPoles)));
    }

    #[test]
    fn debye_weight_matches_drude_form() {
        // η₀ = (π/4) α ω_c² (cot(βω_c/2) − i)
        let spec = BathSpec::new(0.2, 1.0, 3.0).unwrap();
        let d = matsubara_decomposition(&spec, 3).unwrap();
        let expected = c(0.25 * PI * 0.2 / (1.5f64).tan(), -0.25 * PI * 0.2);
        assert!((d.terms[0].eta - expected).norm() < 1e-14);
    }
}
