//! Run configuration (TOML) and the built-in scenario presets.
//!
//! All energies and times are given in units of `ω_c`, which is 1
//! internally.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::hierarchy::{
    ado_count, hierarchy_modes, CouplingConvention, HeomSettings, Integrator, ScanSetting, SystemSpec,
    DEFAULT_MAX_ADOS, DEFAULT_MERGE_GAP,
};
use crate::linalg::{c, hermitian_eigenvalues, hermiticity_residual, projector, Op};
use crate::tomography::DEFAULT_CONDITION_BOUND;

pub const MAX_ALPHA: f64 = 2.0;
pub const MAX_BETA_OMEGA_C: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form label copied into the provenance record.
    #[serde(default)]
    pub name: String,
    pub system: SystemConfig,
    pub bath: BathConfig,
    pub heom: HeomConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    pub initial_state: InitialState,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub epsilon_over_omega_c: f64,
    pub delta_over_omega_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub alpha: f64,
    pub beta_omega_c: f64,
    pub n_pade: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    Rk4,
    #[default]
    Etd4,
    Dopri45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeomConfig {
    pub l_max: usize,
    pub dt_omega_c: f64,
    pub t_final_omega_c: f64,
    #[serde(default)]
    pub integrator: IntegratorKind,
    /// Tolerances of the adaptive integrator.
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub coupling_convention: CouplingConvention,
    /// Parallel evaluation of the hierarchy right-hand side.
    #[serde(default)]
    pub parallel: bool,
    #[serde(default = "default_max_ados")]
    pub max_ados: usize,
    /// Largest condition number of `Φ_t` accepted for `L_t = Φ̇_t Φ_t⁻¹`.
    #[serde(default = "default_condition_bound")]
    pub condition_bound: f64,
}

fn default_rtol() -> f64 {
    1e-10
}
fn default_atol() -> f64 {
    1e-12
}
fn default_max_ados() -> usize {
    DEFAULT_MAX_ADOS
}
fn default_condition_bound() -> f64 {
    DEFAULT_CONDITION_BOUND
}

/// Optional convergence scan; the selected depth and Padé count replace
/// `heom.l_max` and `bath.n_pade`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub tolerance: f64,
    pub t_final_omega_c: f64,
    pub output_interval_omega_c: f64,
    pub grid: Vec<ScanSetting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    /// `ground`, `excited`, `plus` or `plus_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
    /// Row-major `[re, im]` entries of a 2×2 density matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<[[f64; 2]; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Integrator steps between rows of the output tables.
    #[serde(default = "default_stride")]
    pub grid_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl InitialState {
    pub fn named(name: &str) -> Self {
        Self {
            named: Some(name.to_string()),
            custom: None,
        }
    }

    pub fn density_matrix(&self) -> Result<Op, ConfigError> {
        let rho = match (&self.named, &self.custom) {
            (Some(n), None) => {
                projector(n).ok_or_else(|| ConfigError(format!("unknown initial state `{n}`")))?
            }
            (None, Some(m)) => Op::new(
                c(m[0][0], m[0][1]),
                c(m[1][0], m[1][1]),
                c(m[2][0], m[2][1]),
                c(m[3][0], m[3][1]),
            ),
            _ => {
                return Err(ConfigError(
                    "initial_state needs exactly one of `named` or `custom`".into(),
                ))
            }
        };
        if hermiticity_residual(&rho) > 1e-12 {
            return Err(ConfigError("initial state is not Hermitian".into()));
        }
        if (rho.trace().re - 1.0).abs() > 1e-12 {
            return Err(ConfigError("initial state does not have unit trace".into()));
        }
        if hermitian_eigenvalues(&rho)[0] < -1e-12 {
            return Err(ConfigError("initial state is not positive semidefinite".into()));
        }
        Ok(rho)
    }

    pub fn label(&self) -> String {
        match (&self.named, &self.custom) {
            (Some(n), _) => n.clone(),
            _ => "custom".into(),
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn system(&self) -> SystemSpec {
        SystemSpec::new(self.system.epsilon_over_omega_c, self.system.delta_over_omega_c)
    }

    pub fn bath(&self) -> Result<BathSpec, ConfigError> {
        BathSpec::new(self.bath.alpha, 1.0, self.bath.beta_omega_c).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn integrator(&self) -> Integrator {
        match self.heom.integrator {
            IntegratorKind::Rk4 => Integrator::Rk4,
            IntegratorKind::Etd4 => Integrator::Etd4,
            IntegratorKind::Dopri45 => Integrator::Dopri45 {
                rtol: self.heom.rtol,
                atol: self.heom.atol,
            },
        }
    }

    /// Hierarchy settings before any scan.
    pub fn settings(&self) -> HeomSettings {
        HeomSettings {
            l_max: self.heom.l_max,
            n_pade: self.bath.n_pade,
            dt: self.heom.dt_omega_c,
            t_final: self.heom.t_final_omega_c,
            stride: self.output.grid_stride,
            integrator: self.integrator(),
            convention: self.heom.coupling_convention,
            parallel: self.heom.parallel,
            max_ados: self.heom.max_ados,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        check(s.epsilon_over_omega_c.is_finite() && s.delta_over_omega_c.is_finite(), || {
            "system parameters must be finite".into()
        })?;
        let b = &self.bath;
        check((0.0..=MAX_ALPHA).contains(&b.alpha), || {
            format!("bath.alpha = {} outside [0, {MAX_ALPHA}]", b.alpha)
        })?;
        check(b.beta_omega_c > 0.0 && b.beta_omega_c <= MAX_BETA_OMEGA_C, || {
            format!("bath.beta_omega_c = {} outside (0, {MAX_BETA_OMEGA_C}]", b.beta_omega_c)
        })?;
        check(b.n_pade >= 1, || "bath.n_pade must be ≥ 1".into())?;
        let h = &self.heom;
        check(h.dt_omega_c > 0.0 && h.dt_omega_c.is_finite(), || {
            format!("heom.dt_omega_c = {} must be > 0", h.dt_omega_c)
        })?;
        check(h.t_final_omega_c > 0.0 && h.t_final_omega_c.is_finite(), || {
            format!("heom.t_final_omega_c = {} must be > 0", h.t_final_omega_c)
        })?;
        check(h.rtol > 0.0 && h.atol > 0.0, || "heom.rtol and heom.atol must be > 0".into())?;
        check(h.condition_bound > 1.0, || "heom.condition_bound must exceed 1".into())?;
        check(self.output.grid_stride >= 1, || "output.grid_stride must be ≥ 1".into())?;
        let steps = (h.t_final_omega_c / h.dt_omega_c * (1.0 + 1e-12)).floor() as usize;
        check(steps / self.output.grid_stride >= 4, || {
            "the output grid needs at least five points".into()
        })?;
        self.check_budget(h.l_max, b.n_pade)?;
        if let Some(scan) = &self.scan {
            check(!scan.grid.is_empty(), || "scan.grid is empty".into())?;
            check(scan.tolerance > 0.0, || "scan.tolerance must be > 0".into())?;
            check(scan.t_final_omega_c > 0.0 && scan.output_interval_omega_c > 0.0, || {
                "scan times must be > 0".into()
            })?;
            for g in &scan.grid {
                check(g.n_pade >= 1 && g.dt > 0.0, || format!("invalid scan entry {g:?}"))?;
                self.check_budget(g.l_max, g.n_pade)?;
            }
        }
        self.initial_state.density_matrix()?;
        self.bath()?;
        Ok(())
    }

    fn check_budget(&self, l_max: usize, n_pade: usize) -> Result<(), ConfigError> {
        let decomp = crate::bath::pade_decomposition(&self.bath()?, n_pade)
            .map_err(|e| ConfigError(e.to_string()))?;
        let modes = hierarchy_modes(&decomp, DEFAULT_MERGE_GAP).0.len();
        let n = ado_count(modes, l_max);
        check(n <= self.heom.max_ados as f64, || {
            format!(
                "L_max = {l_max} with {modes} modes needs {n} ADOs, above the budget {}",
                self.heom.max_ados
            )
        })
    }
}

pub const PRESETS: [&str; 3] = ["unbiased-nonadiabatic", "biased-nonadiabatic", "biased-adiabatic"];

/// Physical parameters `(ε/ω_c, Δ/ω_c, α, βω_c)` of a preset.
pub fn preset_parameters(name: &str) -> Option<(f64, f64, f64, f64)> {
    match name {
        "unbiased-nonadiabatic" => Some((0.0, 0.2, 0.3, 25.0)),
        "biased-nonadiabatic" => Some((2.5 * 0.2, 0.2, 0.3, 25.0)),
        "biased-adiabatic" => Some((0.1 * 5.0, 5.0, 1.0, 25.0)),
        _ => None,
    }
}

fn grid(entries: &[(usize, usize, f64)]) -> Vec<ScanSetting> {
    entries
        .iter()
        .map(|&(l_max, n_pade, dt)| ScanSetting { l_max, n_pade, dt })
        .collect()
}

/// Built-in configuration of a preset, including its scan grid.
pub fn preset(name: &str) -> Option<RunConfig> {
    let (eps, delta, alpha, beta) = preset_parameters(name)?;
    let adiabatic = name == "biased-adiabatic";
    // The adiabatic system frequency (≈ 10 ω_c) needs a finer output grid
    // for the first-law budget; its map becomes nearly singular after
    // t ≈ 55 as the state purifies.
    let (dt, t_final) = if adiabatic { (0.02, 40.0) } else { (0.05, 50.0) };
    let scan = if adiabatic {
        ScanConfig {
            tolerance: 1e-3,
            t_final_omega_c: 30.0,
            output_interval_omega_c: 0.1,
            grid: grid(&[(4, 10, 0.05), (5, 15, 0.05), (5, 20, 0.05), (5, 25, 0.05)]),
        }
    } else {
        ScanConfig {
            tolerance: 1e-3,
            t_final_omega_c: 30.0,
            output_interval_omega_c: 0.1,
            grid: grid(&[(4, 6, 0.1), (6, 10, 0.1), (7, 14, 0.1)]),
        }
    };
    let (l_max, n_pade) = if adiabatic { (5, 20) } else { (6, 10) };
    Some(RunConfig {
        name: name.to_string(),
        system: SystemConfig {
            epsilon_over_omega_c: eps,
            delta_over_omega_c: delta,
        },
        bath: BathConfig {
            alpha,
            beta_omega_c: beta,
            n_pade,
        },
        heom: HeomConfig {
            l_max,
            dt_omega_c: dt,
            t_final_omega_c: t_final,
            integrator: IntegratorKind::Etd4,
            rtol: default_rtol(),
            atol: default_atol(),
            coupling_convention: CouplingConvention::Standard,
            parallel: false,
            max_ados: DEFAULT_MAX_ADOS,
            condition_bound: DEFAULT_CONDITION_BOUND,
        },
        scan: Some(scan),
        initial_state: InitialState::named("ground"),
        output: OutputConfig {
            directory: PathBuf::from(format!("runs/{name}")),
            grid_stride: 1,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values_are_literal() {
        assert_eq!(preset_parameters("unbiased-nonadiabatic"), Some((0.0, 0.2, 0.3, 25.0)));
        let (e, d, a, b) = preset_parameters("biased-nonadiabatic").unwrap();
        assert!((e / d - 2.5).abs() < 1e-15 && d == 0.2 && a == 0.3 && b == 25.0);
        let (e, d, a, b) = preset_parameters("biased-adiabatic").unwrap();
        assert!((e / d - 0.1).abs() < 1e-15 && d == 5.0 && a == 1.0 && b == 25.0);
        assert!(preset("nope").is_none());
        for p in PRESETS {
            preset(p).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let cfg = preset("unbiased-nonadiabatic").unwrap();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        let typo = text.replace("alpha =", "alpah =");
        let err = RunConfig::from_toml(&typo).unwrap_err();
        assert!(err.0.contains("alpah"), "{}", err.0);
    }

    #[test]
    fn range_checks() {
        let mut cfg = preset("unbiased-nonadiabatic").unwrap();
        cfg.bath.alpha = 2.5;
        assert!(cfg.validate().is_err());
        let mut cfg = preset("unbiased-nonadiabatic").unwrap();
        cfg.bath.beta_omega_c = 150.0;
        assert!(cfg.validate().is_err());
        let mut cfg = preset("unbiased-nonadiabatic").unwrap();
        cfg.heom.l_max = 40;
        assert!(cfg.validate().unwrap_err().0.contains("budget"));
        let mut cfg = preset("unbiased-nonadiabatic").unwrap();
        cfg.initial_state = InitialState { named: None, custom: Some([[0.6, 0.0], [0.0, 0.0], [0.0, 0.0], [0.6, 0.0]]) };
        assert!(cfg.validate().is_err());
    }
}
