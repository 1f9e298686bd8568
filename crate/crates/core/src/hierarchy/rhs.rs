//! Right-hand side of the hierarchy with `σ_z` as the system coupling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::HierarchyTable;
use super::SystemSpec;
use crate::linalg::{c, sigma_z, Op, I};

/// Form of the tier couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingConvention {
    /// Up: `−i[σ_z, ρ⁺]`; down: `−i n_l (η_l σ_z ρ⁻ − η̄_l ρ⁻ σ_z)`.
    #[default]
    Standard,
    /// Up: `−{σ_z, ρ⁺}`; down: `−n_l (η_l σ_z ρ⁻ − η̄_l ρ⁻ σ_z)`; kept for comparison.
    PaperLiteral,
}

/// Precomputed per-run constants.
#[derive(Debug, Clone)]
pub struct HeomOperator<'a> {
    pub table: &'a HierarchyTable,
    pub h: Op,
    /// System side of the coupling; `σ_z` unless the operator was moved to
    /// another basis with [`HeomOperator::in_basis`].
    pub v: Op,
    pub convention: CouplingConvention,
    pub parallel: bool,
}

/// Chunk size for parallel evaluation; results do not depend on it.
const CHUNK: usize = 256;

impl<'a> HeomOperator<'a> {
    pub fn new(table: &'a HierarchyTable, sys: &SystemSpec, convention: CouplingConvention) -> Self {
        Self {
            table,
            h: sys.hamiltonian(),
            v: sigma_z(),
            convention,
            parallel: false,
        }
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// The same operator acting on ADOs written as `U† X U`.
    pub fn in_basis(&self, u: &Op) -> Self {
        let ud = u.adjoint();
        Self {
            h: ud * self.h * u,
            v: ud * self.v * u,
            ..self.clone()
        }
    }

    /// Tier couplings and mode mixing of one rescaled ADO: everything in the
    /// derivative except `−i[H_S, ρ] − Σ n_k γ_k ρ`.
    #[inline]
    pub fn ado_coupling(&self, state: &[Op], offset: usize) -> Op {
        let t = self.table;
        let v = &self.v;
        let mut out = Op::zeros();
        for tr in t.transfers(offset) {
            out += state[tr.target as usize] * tr.coef;
        }
        let mut up_acc = Op::zeros();
        for link in t.up_links(offset) {
            let m = &t.modes[link.mode as usize];
            up_acc += state[link.target as usize] * c(link.sqrt_occupation * m.scale, 0.0);
        }
        // Down couplings summed before multiplying by V:
        // Σ f (η V x − η̄ x V) = V (Σ f η x) − (Σ f η̄ x) V.
        let mut left = Op::zeros();
        let mut right = Op::zeros();
        for link in t.down_links(offset) {
            let m = &t.modes[link.mode as usize];
            let x = &state[link.target as usize];
            let f = link.sqrt_occupation / m.scale;
            left += x * (m.eta * f);
            right += x * (m.eta.conj() * f);
        }
        let vu_left = v * (up_acc + left);
        let right_v = right * v;
        match self.convention {
            CouplingConvention::Standard => out -= (vu_left - up_acc * v - right_v) * I,
            CouplingConvention::PaperLiteral => out -= vu_left + up_acc * v - right_v,
        }
        out
    }

    /// Derivative of one rescaled ADO.
    #[inline]
    pub fn ado_derivative(&self, state: &[Op], offset: usize) -> Op {
        let rho = &state[offset];
        (self.h * rho - rho * self.h) * (-I) - rho * self.table.damping[offset]
            + self.ado_coupling(state, offset)
    }

    fn fill<F: Fn(usize) -> Op + Sync>(&self, out: &mut [Op], f: F) {
        assert_eq!(out.len(), self.table.len());
        if self.parallel && out.len() > CHUNK {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = f(ci * CHUNK + j);
                }
            });
        } else {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = f(i);
            }
        }
    }

    /// Full derivative into `out`. Each output slot is written by exactly one
    /// task, so serial and parallel evaluation agree bit for bit.
    pub fn apply(&self, state: &[Op], out: &mut [Op]) {
        assert_eq!(state.len(), self.table.len());
        self.fill(out, |i| self.ado_derivative(state, i));
    }

    /// [`HeomOperator::ado_coupling`] for every ADO.
    pub fn apply_coupling(&self, state: &[Op], out: &mut [Op]) {
        assert_eq!(state.len(), self.table.len());
        self.fill(out, |i| self.ado_coupling(state, i));
    }

    /// `dρ_S/dt`, the tier-0 component only.
    pub fn system_derivative(&self, state: &[Op]) -> Op {
        self.ado_derivative(state, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{pade_decomposition, BathSpec};
    use crate::linalg::{commutator, sigma_x};

    fn random_state(n: usize, seed: u64) -> Vec<Op> {
        // Small deterministic LCG; the values only need to be generic.
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..n)
            .map(|_| Op::from_fn(|_, _| c(next(), next())))
            .collect()
    }

    #[test]
    fn tier_zero_derivative_is_traceless() {
        let spec = BathSpec::new(0.3, 1.0, 25.0).unwrap();
        let table = HierarchyTable::build(&pade_decomposition(&spec, 3).unwrap(), 3).unwrap();
        let sys = SystemSpec::new(0.5, 0.2);
        let mut state = random_state(table.len(), 7);
        // Physical tier-0 state: Hermitian, unit trace.
        state[0] = Op::new(c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0));
        let op = HeomOperator::new(&table, &sys, CouplingConvention::Standard);
        let d = op.system_derivative(&state);
        assert!(d.trace().norm() <= 1e-14, "{}", d.trace().norm());
    }

    #[test]
    fn parallel_matches_serial_bitwise() {
        let spec = BathSpec::new(0.3, 1.0, 25.0).unwrap();
        let table = HierarchyTable::build(&pade_decomposition(&spec, 4).unwrap(), 5).unwrap();
        let sys = SystemSpec::new(0.5, 0.2);
        let state = random_state(table.len(), 11);
        let serial = HeomOperator::new(&table, &sys, CouplingConvention::Standard);
        let parallel = serial.clone().with_parallel(true);
        let mut a = vec![Op::zeros(); table.len()];
        let mut b = vec![Op::zeros(); table.len()];
        serial.apply(&state, &mut a);
        parallel.apply(&state, &mut b);
        assert!(a == b);
    }

    #[test]
    fn rotated_operator_is_similar() {
        let spec = BathSpec::new(0.3, 1.0, 25.0).unwrap();
        let table = HierarchyTable::build(&pade_decomposition(&spec, 2).unwrap(), 3).unwrap();
        let sys = SystemSpec::new(0.5, 0.2);
        let state = random_state(table.len(), 3);
        let op = HeomOperator::new(&table, &sys, CouplingConvention::Standard);
        // Hadamard-like real rotation.
        let u = (sigma_x() + sigma_z()) * c(0.5f64.sqrt(), 0.0);
        let rotated: Vec<Op> = state.iter().map(|x| u.adjoint() * x * u).collect();
        let mut a = vec![Op::zeros(); table.len()];
        let mut b = vec![Op::zeros(); table.len()];
        op.apply(&state, &mut a);
        op.in_basis(&u).apply(&rotated, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((u.adjoint() * x * u - y).norm() < 1e-13);
        }
    }

    #[test]
    fn decoupled_bath_gives_unitary_rhs() {
        let spec = BathSpec::new(0.0, 1.0, 25.0).unwrap();
        let table = HierarchyTable::build(&pade_decomposition(&spec, 2).unwrap(), 2).unwrap();
        let sys = SystemSpec::new(0.3, 0.2);
        let mut state = vec![Op::zeros(); table.len()];
        state[0] = Op::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let op = HeomOperator::new(&table, &sys, CouplingConvention::Standard);
        let mut out = vec![Op::zeros(); table.len()];
        op.apply(&state, &mut out);
        let h = sys.hamiltonian();
        assert!((out[0] - commutator(&h, &state[0]) * (-I)).norm() < 1e-15);
        assert!(out[1..].iter().all(|x| x.norm() == 0.0));
    }
}
