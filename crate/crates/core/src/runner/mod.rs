//! Scenario orchestration: configuration → (scan) → hierarchy → tomography
//! → thermodynamics, plus persistence of the resulting tables.

mod config;
mod output;
pub mod validate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bath::BathDecomposition;
use crate::hierarchy::{convergence_scan, HeomSettings, HierarchyError, ScanReport, Trajectory};
use crate::linalg::Op;
use crate::thermo::{thermo_series, ThermoError, ThermoSeries};
use crate::tomography::{generator, propagate_basis, snapshots, GeneratorSnapshot, Singularity, TomographyError};

pub use config::{
    preset, preset_parameters, BathConfig, ConfigError, HeomConfig, InitialState, IntegratorKind,
    OutputConfig, RunConfig, ScanConfig, SystemConfig, MAX_ALPHA, MAX_BETA_OMEGA_C, PRESETS,
};
pub use output::{
    emit_plots, read_table, write_artifacts, write_failure, PlotError, FAILURE_MARKER, KS_COLUMNS,
    PLOT_FILES, THERMO_COLUMNS, TRAJECTORY_COLUMNS,
};

pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Scan,
    Hierarchy,
    Tomography,
    Thermo,
    Output,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("scan: {0}")]
    Scan(HierarchyError),
    #[error("hierarchy: {0}")]
    Hierarchy(HierarchyError),
    #[error("tomography: {0}")]
    Tomography(TomographyError),
    #[error("thermo: {0}")]
    Thermo(#[from] ThermoError),
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

impl RunError {
    pub fn stage(&self) -> Stage {
        match self {
            RunError::Config(_) => Stage::Config,
            RunError::Scan(_) => Stage::Scan,
            RunError::Hierarchy(_) => Stage::Hierarchy,
            RunError::Tomography(_) => Stage::Tomography,
            RunError::Thermo(_) => Stage::Thermo,
            RunError::Output(_) => Stage::Output,
        }
    }

    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub software: String,
    pub config_sha256: String,
    pub config: RunConfig,
    pub settings: HeomSettings,
    pub decomposition: BathDecomposition,
    pub n_ados: usize,
    pub scan: Option<ScanReport>,
    pub initial_state: String,
    /// First grid time at which `Φ_t` was too ill-conditioned to invert.
    pub generator_truncated: Option<Singularity>,
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("configuration serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reduced state on the output grid for the configured initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub times: Vec<f64>,
    pub rho: Vec<Op>,
    pub rho_dot: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub provenance: Provenance,
    pub state: StateSeries,
    /// The four tomography runs, in the order of
    /// [`crate::tomography::tomography_states`].
    pub basis_runs: Vec<Trajectory>,
    pub snapshots: Vec<GeneratorSnapshot>,
    pub gibbs_residual: Vec<f64>,
    /// Condition number of `Φ_t` on the generator grid.
    pub condition: Vec<f64>,
    pub thermo: ThermoSeries,
}

/// Stage outputs that exist when a later stage fails.
#[derive(Debug, Default)]
pub struct Partial {
    pub scan: Option<ScanReport>,
    pub state: Option<StateSeries>,
}

#[derive(Debug)]
pub struct RunFailure {
    pub error: RunError,
    pub partial: Partial,
}

impl From<RunError> for RunFailure {
    fn from(error: RunError) -> Self {
        Self {
            error,
            partial: Partial::default(),
        }
    }
}

/// Runs the convergence scan of `cfg` (if any) and returns the settings to
/// use in production.
pub fn scan_settings(cfg: &RunConfig) -> Result<(HeomSettings, Option<ScanReport>), RunError> {
    let base = cfg.settings();
    let Some(scan) = &cfg.scan else {
        return Ok((base, None));
    };
    let rho0 = cfg.initial_state.density_matrix()?;
    let scan_base = HeomSettings {
        t_final: scan.t_final_omega_c,
        ..base
    };
    let report = convergence_scan(
        &cfg.system(),
        &cfg.bath()?,
        &scan_base,
        &scan.grid,
        rho0,
        scan.output_interval_omega_c,
        scan.tolerance,
    )
    .map_err(RunError::Scan)?;
    Ok((report.apply(&base), Some(report)))
}

/// Full pipeline. Equal configurations give bit-identical results.
pub fn run_scenario(cfg: &RunConfig) -> Result<Artifacts, RunFailure> {
    cfg.validate().map_err(RunError::from)?;
    let (settings, scan) = scan_settings(cfg)?;
    let mut partial = Partial {
        scan: scan.clone(),
        state: None,
    };
    let fail = |error: RunError, partial: Partial| RunFailure { error, partial };
    let sys = cfg.system();
    let spec = cfg.bath().map_err(RunError::from)?;
    let rho0 = cfg.initial_state.density_matrix().map_err(RunError::from)?;
    let decomposition = match settings.decomposition(&spec) {
        Ok(d) => d,
        Err(e) => return Err(fail(RunError::Hierarchy(e), partial)),
    };
    let n_ados = match settings.table(&decomposition) {
        Ok(t) => t.len(),
        Err(e) => return Err(fail(RunError::Hierarchy(e), partial)),
    };
    let (map, runs) = match propagate_basis(&sys, &spec, &settings) {
        Ok(r) => r,
        Err(TomographyError::Hierarchy(e)) => return Err(fail(RunError::Hierarchy(e), partial)),
        Err(e) => return Err(fail(RunError::Tomography(e), partial)),
    };
    let (rho, rho_dot): (Vec<Op>, Vec<Op>) = (0..map.len()).map(|i| map.evolve(i, &rho0)).unzip();
    let state = StateSeries {
        times: map.times.clone(),
        rho,
        rho_dot,
    };
    partial.state = Some(state.clone());
    let gen = generator(&map, cfg.heom.condition_bound);
    let snaps = match snapshots(&gen, settings.parallel) {
        Ok(s) => s,
        Err(e) => return Err(fail(RunError::Tomography(e), partial)),
    };
    let m = snaps.len();
    let k_s: Vec<Op> = snaps.iter().map(|s| s.k_s).collect();
    let thermo = match thermo_series(
        &gen.times,
        &k_s,
        &state.rho[..m],
        &state.rho_dot[..m],
        &sys.hamiltonian(),
        spec.beta,
    ) {
        Ok(t) => t,
        Err(e) => return Err(fail(RunError::Thermo(e), partial)),
    };
    let gibbs_residual = snaps.iter().map(|s| s.gibbs_residual(spec.beta)).collect();
    let provenance = Provenance {
        software: SOFTWARE.to_string(),
        config_sha256: config_hash(cfg),
        config: cfg.clone(),
        settings,
        decomposition,
        n_ados,
        scan,
        initial_state: cfg.initial_state.label(),
        generator_truncated: gen.truncated,
    };
    Ok(Artifacts {
        provenance,
        state,
        basis_runs: runs.to_vec(),
        snapshots: snaps,
        gibbs_residual,
        condition: gen.condition[..m].to_vec(),
        thermo,
    })
}

impl Artifacts {
    /// `(k_x, k_y, k_z)` of `K_S − H_S` along the generator grid.
    pub fn shifts(&self) -> Vec<[f64; 3]> {
        let h = self.provenance.config.system().hamiltonian();
        self.snapshots
            .iter()
            .map(|s| crate::tomography::bloch_vector(&(s.k_s - h)))
            .collect()
    }
}
