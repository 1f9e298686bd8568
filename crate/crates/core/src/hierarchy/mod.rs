//! Hierarchical equations of motion for the spin-boson model.
//!
//! ADOs are stored rescaled by `Π_k (n_k! |η_k|^{n_k})^{-1/2}`; tier-0 is
//! unaffected, so `state[0]` is always the physical reduced density matrix.

mod checkpoint;
mod index;
mod integrate;
mod rhs;
mod run;
mod scan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::BathError;
use crate::linalg::{c, sigma_x, sigma_z, Op};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use index::{
    ado_count, hierarchy_modes, importance_costs, AdoIndex, HierarchyTable, Link, Mixing, Mode,
    TableOptions, Transfer, Truncation, DEFAULT_MAX_ADOS, DEFAULT_MERGE_GAP,
};
pub use integrate::{propagate, Integrator, Trajectory};
pub use rhs::{CouplingConvention, HeomOperator};
pub use run::{run_hierarchy, HeomSettings};
pub use scan::{convergence_scan, ScanEntry, ScanReport, ScanSetting};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("hierarchy needs {required} ADOs, budget is {budget}")]
    Budget { required: f64, budget: usize },
    #[error("propagation diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("adaptive step size underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },
    #[error("invalid propagation setup: {0}")]
    Invalid(String),
    #[error("state has {got} ADOs, table has {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error("no setting in the scan grid converged (smallest difference {best:e}, tolerance {tolerance:e})")]
    NotConverged { best: f64, tolerance: f64 },
}

/// Two-level system `H_S = −ε σ_z + Δ σ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub epsilon: f64,
    pub delta: f64,
}

impl SystemSpec {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self { epsilon, delta }
    }

    pub fn hamiltonian(&self) -> Op {
        sigma_x() * c(self.delta, 0.0) - sigma_z() * c(self.epsilon, 0.0)
    }
}

/// Reduced density matrix and all ADOs at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    pub ados: Vec<Op>,
    pub time: f64,
}

impl HierarchyState {
    /// Factorized initial condition: `ρ_S(0) = rho0`, all ADOs zero.
    pub fn initial(table: &HierarchyTable, rho0: Op) -> Self {
        let mut ados = vec![Op::zeros(); table.len()];
        ados[0] = rho0;
        Self { ados, time: 0.0 }
    }

    pub fn rho(&self) -> &Op {
        &self.ados[0]
    }

    /// ADO in physical (unscaled) normalization.
    pub fn physical_ado(&self, table: &HierarchyTable, offset: usize) -> Op {
        self.ados[offset] * c(table.physical_scale(offset), 0.0)
    }
}
