//! Spin-boson dynamics with the hierarchical equations of motion, process
//! tomography of the reduced dynamics, the minimal-dissipation effective
//! Hamiltonian and the thermodynamic quantities built on it.
//!
//! Units: `ω_c = 1`; energies in `ω_c`, times in `1/ω_c`.

pub mod bath;
pub mod hierarchy;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod runner;
pub mod thermo;
pub mod tomography;
