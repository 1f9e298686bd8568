//! Oracle and invariant suites behind the `validate` subcommand.
//!
//! Every check reports a measured residual against a budget; a check passes
//! when `measured ≤ budget`.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64 as C64;

use super::{run_scenario, Artifacts, RunConfig, StateSeries};
use crate::bath::BathSpec;
use crate::hierarchy::{run_hierarchy, CouplingConvention, HeomSettings, SystemSpec};
use crate::linalg::{hermiticity_residual, hermitian_eigenvalues, projector, sigma_z, Op};
use crate::oracle::{tcl2_propagate, trace_distance_norm, DephasingSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub budget: f64,
}

impl Check {
    pub fn new(suite: &'static str, name: impl Into<String>, measured: f64, budget: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            measured,
            budget,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.budget
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: {:.3e} (budget {:.3e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.budget
        )
    }
}

/// A check that could not be evaluated counts as failed.
fn errored(suite: &'static str, name: &str, err: impl fmt::Display) -> Check {
    Check::new(suite, format!("{name} ({err})"), f64::INFINITY, 0.0)
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub seconds: Vec<(&'static str, f64)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    fn timed(&mut self, suite: &'static str, f: impl FnOnce() -> Vec<Check>) {
        let start = Instant::now();
        self.checks.extend(f());
        self.seconds.push((suite, start.elapsed().as_secs_f64()));
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x) })
}

/// A scan-free configuration for arbitrary parameters, used by the suites.
#[allow(clippy::too_many_arguments)]
pub fn config(
    name: &str,
    (epsilon, delta): (f64, f64),
    (alpha, beta): (f64, f64),
    (l_max, n_pade): (usize, usize),
    dt: f64,
    t_final: f64,
) -> RunConfig {
    let mut cfg = super::preset("unbiased-nonadiabatic").expect("built-in preset");
    cfg.name = name.to_string();
    cfg.system.epsilon_over_omega_c = epsilon;
    cfg.system.delta_over_omega_c = delta;
    cfg.bath.alpha = alpha;
    cfg.bath.beta_omega_c = beta;
    cfg.bath.n_pade = n_pade;
    cfg.heom.l_max = l_max;
    cfg.heom.dt_omega_c = dt;
    cfg.heom.t_final_omega_c = t_final;
    cfg.scan = None;
    cfg.output.directory = format!("runs/{name}").into();
    cfg
}

/// Structural invariants of a completed run.
pub fn invariant_checks(suite: &'static str, a: &Artifacts) -> Vec<Check> {
    let states = || a.basis_runs.iter().flat_map(|r| r.rho.iter()).chain(a.state.rho.iter());
    let trace = max_of(states().map(|r| (r.trace() - C64::new(1.0, 0.0)).norm()));
    let herm = max_of(states().map(hermiticity_residual));
    let min_eig = states()
        .map(|r| hermitian_eigenvalues(&((r + r.adjoint()) * C64::new(0.5, 0.0)))[0])
        .fold(f64::INFINITY, f64::min);
    let s = &a.snapshots;
    let kraus = max_of(s.iter().map(|s| s.kraus_constraint));
    let split = max_of(s.iter().map(|s| s.split_residual));
    let annihilation = max_of(s.iter().map(|s| s.trace_annihilation()));
    let ks_herm = max_of(s.iter().map(|s| hermiticity_residual(&s.k_s)));
    let ks_trace = max_of(s.iter().map(|s| s.k_s.trace().norm()));
    let scale = a.thermo.max_abs_u();
    vec![
        Check::new(suite, "trace preservation", trace, 1e-8),
        Check::new(suite, "hermiticity", herm, 1e-10),
        Check::new(suite, "negative eigenvalue", (-min_eig).max(0.0), 1e-6),
        Check::new(suite, "pseudo-Kraus constraint", kraus, 1e-8),
        Check::new(suite, "generator trace annihilation", annihilation, 1e-8),
        Check::new(suite, "splitting reconstruction", split, 1e-8),
        Check::new(suite, "K_S hermiticity", ks_herm, 1e-10),
        Check::new(suite, "K_S trace", ks_trace, 1e-10),
        Check::new(suite, "first law / max|U_S|", a.thermo.first_law_residual() / scale.max(1e-300), 1e-6),
    ]
}

/// `α = 0`, `ε = 0`: Rabi oscillation `⟨σ_z⟩ = cos 2Δt`, `K_S = H_S`, no
/// work or heat.
pub fn closed_system_suite() -> Vec<Check> {
    const SUITE: &str = "closed-system";
    let delta = 0.2;
    let cfg = config("closed-system", (0.0, delta), (0.0, 25.0), (1, 1), 0.05, 50.0);
    let a = match run_scenario(&cfg) {
        Ok(a) => a,
        Err(f) => return vec![errored(SUITE, "run", f.error)],
    };
    let rabi = max_of(
        a.state
            .times
            .iter()
            .zip(&a.state.rho)
            .map(|(t, r)| ((r[(0, 0)] - r[(1, 1)]).re - (2.0 * delta * t).cos()).abs()),
    );
    let h = cfg.system().hamiltonian();
    let ks = max_of(a.snapshots.iter().map(|s| (s.k_s - h).norm()));
    let wq = max_of(a.thermo.w.iter().chain(&a.thermo.q).map(|x| x.abs()));
    let mut checks = vec![
        Check::new(SUITE, "<sigma_z> vs cos(2 delta t)", rabi, 1e-8),
        Check::new(SUITE, "K_S - H_S", ks, 1e-8),
        Check::new(SUITE, "W_S and Q_S", wq, 1e-10),
    ];
    checks.extend(invariant_checks(SUITE, &a));
    checks
}

/// Settings of the dephasing suite.
#[derive(Debug, Clone, Copy)]
pub struct DephasingOptions {
    pub convention: CouplingConvention,
    /// `(L_max, n_pade)` for the coherence comparison.
    pub coherence: (usize, usize),
    /// `(L_max, n_pade)` for the `K_S` comparison.
    pub effective_hamiltonian: (usize, usize),
    pub dt: f64,
    /// Step of the `K_S` runs; the phase error of the integrator enters
    /// `K_S` directly.
    pub dt_effective_hamiltonian: f64,
}

impl Default for DephasingOptions {
    fn default() -> Self {
        Self {
            convention: CouplingConvention::Standard,
            coherence: (7, 20),
            effective_hamiltonian: (5, 20),
            dt: 0.05,
            dt_effective_hamiltonian: 0.025,
        }
    }
}

pub const DEPHASING_EPSILON: f64 = 0.5;
pub const DEPHASING_ALPHA: f64 = 0.3;
pub const DEPHASING_BETA: f64 = 25.0;
pub const DEPHASING_T_FINAL: f64 = 10.0;

/// `Δ = 0` against the closed-form coherence `e^{2iεt} e^{−Γ(t)}`, and
/// `K_S = −εσ_z`.
pub fn dephasing_suite(opts: &DephasingOptions) -> Vec<Check> {
    const SUITE: &str = "dephasing";
    let (eps, alpha, beta) = (DEPHASING_EPSILON, DEPHASING_ALPHA, DEPHASING_BETA);
    let spec = match BathSpec::new(alpha, 1.0, beta) {
        Ok(s) => s,
        Err(e) => return vec![errored(SUITE, "bath", e)],
    };
    let sys = SystemSpec::new(eps, 0.0);
    let settings = HeomSettings {
        l_max: opts.coherence.0,
        n_pade: opts.coherence.1,
        dt: opts.dt,
        t_final: DEPHASING_T_FINAL,
        convention: opts.convention,
        ..HeomSettings::default()
    };
    let plus = projector("plus").expect("known state");
    let mut checks = Vec::new();
    match run_hierarchy(&sys, &spec, &settings, plus) {
        Ok(traj) => match DephasingSolution::on_grid(&spec, eps, &traj.times) {
            Ok(exact) => {
                let rel = max_of(traj.rho.iter().enumerate().map(|(i, r)| {
                    let e = exact.coherence(i, plus[(0, 1)]);
                    (r[(0, 1)].norm() - e.norm()).abs() / e.norm()
                }));
                let phase = max_of(traj.rho.iter().enumerate().map(|(i, r)| {
                    let e = exact.coherence(i, plus[(0, 1)]);
                    (r[(0, 1)] / r[(0, 1)].norm() - e / e.norm()).norm()
                }));
                let pops = max_of(traj.rho.iter().map(|r| (r[(0, 0)] - plus[(0, 0)]).norm()));
                checks.push(Check::new(SUITE, "|rho_01| relative to exp(-Gamma)", rel, 1e-4));
                // Exact in continuum at any depth; the integrator adds O(dt⁴).
                checks.push(Check::new(SUITE, "rho_01 phase vs 2 eps t", phase, 1e-3));
                checks.push(Check::new(SUITE, "population conservation", pops, 1e-10));
            }
            Err(e) => checks.push(errored(SUITE, "decoherence function", e)),
        },
        Err(e) => checks.push(errored(SUITE, "hierarchy", e)),
    }
    let (l_max, n_pade) = opts.effective_hamiltonian;
    let mut cfg = config("dephasing", (eps, 0.0), (alpha, beta), (l_max, n_pade), opts.dt_effective_hamiltonian, DEPHASING_T_FINAL);
    cfg.heom.coupling_convention = opts.convention;
    match run_scenario(&cfg) {
        Ok(a) => {
            let target = sigma_z() * C64::new(-eps, 0.0);
            let ks = max_of(a.snapshots.iter().map(|s| (s.k_s - target).norm()));
            checks.push(Check::new(SUITE, "K_S + eps sigma_z", ks, 1e-6 * eps));
        }
        Err(f) => checks.push(errored(SUITE, "K_S run", f.error)),
    }
    checks
}

/// Weak coupling `α = 0.01` against the second-order time-convolutionless
/// master equation.
pub fn tcl2_suite() -> Vec<Check> {
    const SUITE: &str = "tcl2";
    let (eps, delta, alpha, beta, t_final, dt) = (0.0, 0.2, 0.01, 25.0, 50.0, 0.05);
    let spec = match BathSpec::new(alpha, 1.0, beta) {
        Ok(s) => s,
        Err(e) => return vec![errored(SUITE, "bath", e)],
    };
    let rho0 = projector("ground").expect("known state");
    let settings = HeomSettings {
        l_max: 3,
        n_pade: 10,
        dt,
        t_final,
        ..HeomSettings::default()
    };
    let heom = match run_hierarchy(&SystemSpec::new(eps, delta), &spec, &settings, rho0) {
        Ok(t) => t,
        Err(e) => return vec![errored(SUITE, "hierarchy", e)],
    };
    let tcl = match tcl2_propagate(eps, delta, &spec, rho0, dt, t_final, 1) {
        Ok(t) => t,
        Err(e) => return vec![errored(SUITE, "tcl2", e)],
    };
    if heom.times.len() != tcl.times.len() {
        return vec![errored(SUITE, "grid", "time grids differ")];
    }
    let dist = max_of(heom.rho.iter().zip(&tcl.rho).map(|(a, b)| trace_distance_norm(&(a - b))));
    vec![Check::new(SUITE, "sup trace distance HEOM vs TCL2", dist, 5e-3)]
}

/// Invariants on the production settings of a preset, without its scan.
pub fn preset_invariant_suite(name: &'static str) -> Vec<Check> {
    let Some(mut cfg) = super::preset(name) else {
        return vec![errored("invariants", name, "unknown preset")];
    };
    cfg.scan = None;
    match run_scenario(&cfg) {
        Ok(a) => invariant_checks(name, &a),
        Err(f) => vec![errored(name, "run", f.error)],
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    pub dephasing: DephasingOptions,
    /// Skip the slow dephasing and preset suites.
    pub quick: bool,
}

/// Runs all suites. Cheap suites first.
pub fn validate(opts: &ValidateOptions) -> Report {
    let mut report = Report::default();
    report.timed("closed-system", closed_system_suite);
    report.timed("tcl2", tcl2_suite);
    if !opts.quick {
        report.timed("dephasing", || dephasing_suite(&opts.dephasing));
        report.timed("invariants", || preset_invariant_suite("unbiased-nonadiabatic"));
    }
    report
}

/// Relaxation time of a series: the last time at which its distance from
/// the final value exceeds `1/e` of the peak distance.
pub fn relaxation_time(times: &[f64], series: &[Op]) -> f64 {
    let Some(last) = series.last() else {
        return 0.0;
    };
    let dev: Vec<f64> = series.iter().map(|x| (x - last).norm()).collect();
    let threshold = max_of(dev.iter().copied()) / std::f64::consts::E;
    times
        .iter()
        .zip(&dev)
        .filter(|(_, d)| **d > threshold)
        .map(|(t, _)| *t)
        .fold(0.0, f64::max)
}

impl StateSeries {
    pub fn relaxation_time(&self) -> f64 {
        relaxation_time(&self.times, &self.rho)
    }
}

impl Artifacts {
    /// Relaxation time of `K_S(t)`.
    pub fn ks_relaxation_time(&self) -> f64 {
        let k: Vec<Op> = self.snapshots.iter().map(|s| s.k_s).collect();
        let times: Vec<f64> = self.snapshots.iter().map(|s| s.time).collect();
        relaxation_time(&times, &k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_system_passes() {
        let checks = closed_system_suite();
        for c in &checks {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn paper_literal_coupling_fails_dephasing() {
        let opts = DephasingOptions {
            convention: CouplingConvention::PaperLiteral,
            coherence: (3, 4),
            effective_hamiltonian: (2, 4),
            dt: 0.1,
            dt_effective_hamiltonian: 0.1,
        };
        let checks = dephasing_suite(&opts);
        assert!(checks.iter().any(|c| !c.passed()), "{checks:?}");
    }

    #[test]
    fn relaxation_time_of_exponential() {
        let times: Vec<f64> = (0..2001).map(|i| i as f64 * 0.01).collect();
        let series: Vec<Op> = times.iter().map(|t| sigma_z() * C64::new((-t / 2.0f64).exp(), 0.0)).collect();
        let tau = relaxation_time(&times, &series);
        assert!((tau - 2.0).abs() < 0.02, "{tau}");
    }
}
