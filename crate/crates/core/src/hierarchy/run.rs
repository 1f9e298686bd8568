//! One complete hierarchy run from physical and numerical settings.

use serde::{Deserialize, Serialize};

use super::{
    propagate, CouplingConvention, HeomOperator, HierarchyError, HierarchyState, HierarchyTable,
    Integrator, SystemSpec, TableOptions, Trajectory, DEFAULT_MAX_ADOS,
};
use crate::bath::{pade_decomposition, BathDecomposition, BathSpec};
use crate::linalg::Op;

/// Numerical settings of a hierarchy run. Times in units of `1/ω_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeomSettings {
    pub l_max: usize,
    pub n_pade: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Steps between recorded grid points.
    pub stride: usize,
    pub integrator: Integrator,
    pub convention: CouplingConvention,
    pub parallel: bool,
    pub max_ados: usize,
}

impl Default for HeomSettings {
    fn default() -> Self {
        Self {
            l_max: 6,
            n_pade: 10,
            dt: 0.1,
            t_final: 50.0,
            stride: 1,
            integrator: Integrator::Etd4,
            convention: CouplingConvention::Standard,
            parallel: false,
            max_ados: DEFAULT_MAX_ADOS,
        }
    }
}

impl HeomSettings {
    pub fn decomposition(&self, spec: &BathSpec) -> Result<BathDecomposition, HierarchyError> {
        Ok(pade_decomposition(spec, self.n_pade)?)
    }

    pub fn table(&self, decomp: &BathDecomposition) -> Result<HierarchyTable, HierarchyError> {
        let options = TableOptions {
            max_ados: self.max_ados,
            ..TableOptions::default()
        };
        HierarchyTable::build_with(decomp, self.l_max, &options)
    }

    /// Output grid spacing.
    pub fn output_interval(&self) -> f64 {
        self.dt * self.stride as f64
    }
}

/// Propagates `ρ_S(0) = rho0` with a factorized bath and records `ρ_S`,
/// `ρ̇_S` on the output grid.
pub fn run_hierarchy(
    sys: &SystemSpec,
    spec: &BathSpec,
    settings: &HeomSettings,
    rho0: Op,
) -> Result<Trajectory, HierarchyError> {
    let decomp = settings.decomposition(spec)?;
    let table = settings.table(&decomp)?;
    let op = HeomOperator::new(&table, sys, settings.convention).with_parallel(settings.parallel);
    let mut state = HierarchyState::initial(&table, rho0);
    propagate(
        &mut state,
        &op,
        settings.dt,
        settings.t_final,
        settings.stride,
        settings.integrator,
    )
}
