//! Dynamical-map tomography, the exact time-local generator
//! `L_t = Φ̇_t Φ_t⁻¹`, and its minimal-dissipation split into an effective
//! Hamiltonian `K_S(t)` and a dissipator with traceless Lindblad operators.
//!
//! Superoperators act on the orthonormal Pauli coordinates of [`crate::linalg`].

use std::cmp::Ordering;

use nalgebra::Vector4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::BathSpec;
use crate::hierarchy::{run_hierarchy, HeomSettings, HierarchyError, SystemSpec, Trajectory};
use crate::linalg::{
    apply_superop, c, choi_from_superop, hamiltonian_superop, hermitian_function,
    hermitian_eigenvalues, projector, superop_matrix, Op, Super, I, ZERO,
};

pub const DEFAULT_CONDITION_BOUND: f64 = 1e8;
/// Budget for `‖L_t − (−i[K_S,·] + D_t)‖_F` and for the Choi Hermiticity.
pub const SPLIT_TOLERANCE: f64 = 1e-8;
/// Choi eigenvalues below this fraction of `‖C‖_F` are dropped.
const KRAUS_CUTOFF: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("generator is not Hermiticity preserving at t = {time} (Choi residual {residual:e})")]
    NotHermitian { time: f64, residual: f64 },
    #[error("minimal-dissipation split does not reproduce the generator at t = {time} (residual {residual:e})")]
    Inconsistent { time: f64, residual: f64 },
    #[error("series lengths differ: {0} vs {1}")]
    GridMismatch(usize, usize),
}

/// Physical initial states used for tomography: `|0⟩, |1⟩, |+⟩, |+i⟩`.
pub fn tomography_states() -> [Op; 4] {
    ["ground", "excited", "plus", "plus_i"].map(|n| projector(n).expect("known state"))
}

/// Pauli basis elements as combinations of [`tomography_states`]:
/// row `j` holds the coefficients of `P_j`.
fn basis_combinations() -> [[f64; 4]; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        [s, s, 0.0, 0.0],
        [-s, -s, 2.0 * s, 0.0],
        [-s, -s, 0.0, 2.0 * s],
        [s, -s, 0.0, 0.0],
    ]
}

/// `Φ_t` and `Φ̇_t` on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSeries {
    pub times: Vec<f64>,
    pub phi: Vec<Super>,
    pub phi_dot: Vec<Super>,
}

impl MapSeries {
    /// Assembles the map from runs started in [`tomography_states`].
    pub fn from_trajectories(runs: &[Trajectory; 4]) -> Result<Self, TomographyError> {
        let n = runs[0].len();
        for r in &runs[1..] {
            if r.len() != n {
                return Err(TomographyError::GridMismatch(n, r.len()));
            }
        }
        let comb = basis_combinations();
        let column = |series: &dyn Fn(&Trajectory) -> &Op, j: usize| {
            let op = (0..4).fold(Op::zeros(), |acc, s| acc + series(&runs[s]) * c(comb[j][s], 0.0));
            crate::linalg::to_pauli(&op)
        };
        let mut phi = Vec::with_capacity(n);
        let mut phi_dot = Vec::with_capacity(n);
        for i in 0..n {
            let mut m = Super::zeros();
            let mut md = Super::zeros();
            for j in 0..4 {
                m.set_column(j, &column(&|t: &Trajectory| &t.rho[i], j));
                md.set_column(j, &column(&|t: &Trajectory| &t.rho_dot[i], j));
            }
            phi.push(m);
            phi_dot.push(md);
        }
        Ok(Self {
            times: runs[0].times.clone(),
            phi,
            phi_dot,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(ρ(t_i), ρ̇(t_i))` for the initial state `rho0`.
    pub fn evolve(&self, i: usize, rho0: &Op) -> (Op, Op) {
        (apply_superop(&self.phi[i], rho0), apply_superop(&self.phi_dot[i], rho0))
    }

    /// Deviation of the identity row of `Φ_t` from `(1, 0, 0, 0)`.
    pub fn trace_row_residual(&self, i: usize) -> f64 {
        let m = &self.phi[i];
        (0..4)
            .map(|j| (m[(0, j)] - if j == 0 { c(1.0, 0.0) } else { ZERO }).norm())
            .fold(0.0, f64::max)
    }

    /// Largest imaginary part of `Φ_t` in the Pauli basis.
    pub fn hermiticity_residual(&self, i: usize) -> f64 {
        self.phi[i].iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

/// Propagates the four tomography states and assembles `Φ_t`, `Φ̇_t`.
/// The runs are independent and execute concurrently when
/// `settings.parallel` is set.
pub fn propagate_basis(
    sys: &SystemSpec,
    spec: &BathSpec,
    settings: &HeomSettings,
) -> Result<(MapSeries, [Trajectory; 4]), TomographyError> {
    let states = tomography_states();
    let run = |rho0: &Op| run_hierarchy(sys, spec, settings, *rho0);
    let results: Vec<Result<Trajectory, HierarchyError>> = if settings.parallel {
        states.par_iter().map(run).collect()
    } else {
        states.iter().map(run).collect()
    };
    let mut runs = Vec::with_capacity(4);
    for r in results {
        runs.push(r?);
    }
    let runs: [Trajectory; 4] = runs.try_into().expect("four runs");
    let map = MapSeries::from_trajectories(&runs)?;
    Ok((map, runs))
}

/// Time at which `Φ_t` stopped being safely invertible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub time: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSeries {
    pub times: Vec<f64>,
    pub gen: Vec<Super>,
    pub condition: Vec<f64>,
    /// Set when the series was cut short at a near-singular map.
    pub truncated: Option<Singularity>,
}

pub fn condition_number(m: &Super) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `L_t = Φ̇_t Φ_t⁻¹` up to the first grid time whose condition number
/// exceeds `bound`.
pub fn generator(map: &MapSeries, bound: f64) -> GeneratorSeries {
    let mut out = GeneratorSeries {
        times: Vec::with_capacity(map.len()),
        gen: Vec::with_capacity(map.len()),
        condition: Vec::with_capacity(map.len()),
        truncated: None,
    };
    for i in 0..map.len() {
        let cond = condition_number(&map.phi[i]);
        let inv = if cond <= bound { map.phi[i].try_inverse() } else { None };
        let Some(inv) = inv else {
            out.truncated = Some(Singularity {
                time: map.times[i],
                condition: cond,
            });
            break;
        };
        out.times.push(map.times[i]);
        out.gen.push(map.phi_dot[i] * inv);
        out.condition.push(cond);
    }
    out
}

/// Choi matrix of a generator, Hermitized after checking that the
/// anti-Hermitian part is below `tolerance · max(1, ‖C‖_F)`.
pub fn choi_of_generator(gen: &Super, tolerance: f64) -> Result<Super, f64> {
    let choi = choi_from_superop(gen);
    let residual = (choi - choi.adjoint()).norm();
    if residual > tolerance * choi.norm().max(1.0) {
        return Err(residual);
    }
    Ok((choi + choi.adjoint()) * c(0.5, 0.0))
}

/// One term `θ E ρ E†` of a pseudo-Kraus or Lindblad representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausTerm {
    pub theta: f64,
    pub op: Op,
}

/// Rotates `e` so that its first entry of (numerically) largest modulus is
/// real and positive.
fn fix_phase(e: Op) -> Op {
    let entries = [e[(0, 0)], e[(1, 0)], e[(0, 1)], e[(1, 1)]];
    let top = entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match entries.iter().find(|z| z.norm() >= top * (1.0 - 1e-10)) {
        Some(z) if top > 0.0 => e * (z.conj() / z.norm()),
        _ => e,
    }
}

fn lexicographic(a: &Op, b: &Op) -> Ordering {
    a.iter()
        .zip(b.iter())
        .flat_map(|(x, y)| [(x.re, y.re), (x.im, y.im)])
        .map(|(x, y)| x.total_cmp(&y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Eigendecomposition `C = Σ θ_k vec(E_k) vec(E_k)†` with unit-norm `E_k`,
/// sorted by descending `|θ_k|`. Eigenvalues that vanish at round-off level
/// are dropped.
pub fn pseudo_kraus(choi: &Super) -> Vec<KrausTerm> {
    let scale = choi.norm();
    if scale == 0.0 {
        return Vec::new();
    }
    let eig = choi.symmetric_eigen();
    let mut terms: Vec<KrausTerm> = (0..4)
        .filter(|&k| eig.eigenvalues[k].abs() > KRAUS_CUTOFF * scale)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            let e = Op::from_fn(|a, i| v[2 * i + a]);
            KrausTerm {
                theta: eig.eigenvalues[k],
                op: fix_phase(e),
            }
        })
        .collect();
    terms.sort_by(|x, y| {
        let (ax, ay) = (x.theta.abs(), y.theta.abs());
        if (ax - ay).abs() > 1e-12 * scale {
            ay.total_cmp(&ax)
        } else {
            y.theta.total_cmp(&x.theta).then_with(|| lexicographic(&x.op, &y.op))
        }
    });
    terms
}

/// `Σ θ_k E_k† E_k`; vanishes for trace-annihilating generators.
pub fn kraus_constraint(terms: &[KrausTerm]) -> Op {
    terms
        .iter()
        .fold(Op::zeros(), |acc, t| acc + t.op.adjoint() * t.op * c(t.theta, 0.0))
}

/// Superoperator `ρ ↦ Σ θ_k E_k ρ E_k†`.
pub fn kraus_superop(terms: &[KrausTerm]) -> Super {
    superop_matrix(|x| {
        terms
            .iter()
            .fold(Op::zeros(), |acc, t| acc + t.op * x * t.op.adjoint() * c(t.theta, 0.0))
    })
}

/// `K_S = −(i/4) Σ θ_k (Tr{E_k} E_k† − Tr{E_k†} E_k)`.
pub fn effective_hamiltonian(terms: &[KrausTerm]) -> Op {
    terms.iter().fold(Op::zeros(), |acc, t| {
        let tr = t.op.trace();
        acc + (t.op.adjoint() * tr - t.op * tr.conj()) * (-I * (t.theta / 4.0))
    })
}

/// Traceless Lindblad operators `L_k = E_k − Tr{E_k}/2`.
pub fn minimal_dissipator(terms: &[KrausTerm]) -> Vec<KrausTerm> {
    terms
        .iter()
        .map(|t| KrausTerm {
            theta: t.theta,
            op: t.op - Op::identity() * (t.op.trace() * 0.5),
        })
        .collect()
}

/// Diagonal form of a Lindblad set: the rates and orthonormal operators of
/// the matrix `Σ θ_k vec(L_k) vec(L_k)†`. The dissipator is unchanged.
pub fn canonical_dissipator(lindblad: &[KrausTerm]) -> Vec<KrausTerm> {
    pseudo_kraus(&choi_from_superop(&kraus_superop(lindblad)))
}

/// `ρ ↦ Σ θ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn dissipator_superop(lindblad: &[KrausTerm]) -> Super {
    superop_matrix(|x| {
        lindblad.iter().fold(Op::zeros(), |acc, t| {
            let ld = t.op.adjoint();
            let ll = ld * t.op;
            acc + (t.op * x * ld - (ll * x + x * ll) * c(0.5, 0.0)) * c(t.theta, 0.0)
        })
    })
}

/// `‖L − (−i[K,·] + D)‖_F`.
pub fn split_residual(gen: &Super, k_s: &Op, lindblad: &[KrausTerm]) -> f64 {
    (gen - hamiltonian_superop(k_s) - dissipator_superop(lindblad)).norm()
}

/// `e^{−βK}/Z`.
pub fn gibbs_state(k: &Op, beta: f64) -> Op {
    let [lo, _] = hermitian_eigenvalues(k);
    let g = hermitian_function(k, |x| (-beta * (x - lo)).exp());
    g / g.trace()
}

/// `‖L_t[e^{−βK}/Z]‖_F`.
pub fn gibbs_fixed_point_residual(k: &Op, beta: f64, gen: &Super) -> f64 {
    apply_superop(gen, &gibbs_state(k, beta)).norm()
}

/// Everything derived from the generator at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSnapshot {
    pub time: f64,
    pub gen: Super,
    pub choi: Super,
    pub kraus: Vec<KrausTerm>,
    pub k_s: Op,
    pub lindblad: Vec<KrausTerm>,
    /// `‖Σ θ_k E_k†E_k‖_F`.
    pub kraus_constraint: f64,
    pub split_residual: f64,
}

impl GeneratorSnapshot {
    pub fn new(time: f64, gen: Super) -> Result<Self, TomographyError> {
        let choi = choi_of_generator(&gen, SPLIT_TOLERANCE)
            .map_err(|residual| TomographyError::NotHermitian { time, residual })?;
        let kraus = pseudo_kraus(&choi);
        let k_s = effective_hamiltonian(&kraus);
        let lindblad = minimal_dissipator(&kraus);
        let split = split_residual(&gen, &k_s, &lindblad);
        if split > SPLIT_TOLERANCE * gen.norm().max(1.0) {
            return Err(TomographyError::Inconsistent { time, residual: split });
        }
        Ok(Self {
            time,
            kraus_constraint: kraus_constraint(&kraus).norm(),
            gen,
            choi,
            kraus,
            k_s,
            lindblad,
            split_residual: split,
        })
    }

    /// Fixed-point residual of the instantaneous Gibbs state of `K_S`.
    pub fn gibbs_residual(&self, beta: f64) -> f64 {
        gibbs_fixed_point_residual(&self.k_s, beta, &self.gen)
    }

    /// Norm of the identity row of `L_t`.
    pub fn trace_annihilation(&self) -> f64 {
        Vector4::from_fn(|j, _| self.gen[(0, j)]).norm()
    }
}

/// Snapshots for every generator time; parallel over the grid on request.
pub fn snapshots(series: &GeneratorSeries, parallel: bool) -> Result<Vec<GeneratorSnapshot>, TomographyError> {
    let make = |(t, g): (&f64, &Super)| GeneratorSnapshot::new(*t, *g);
    if parallel {
        series.times.par_iter().zip(&series.gen).map(make).collect()
    } else {
        series.times.iter().zip(&series.gen).map(make).collect()
    }
}

/// `(k_x, k_y, k_z)` with `K = k·σ` for a traceless Hermitian `K`.
pub fn bloch_vector(k: &Op) -> [f64; 3] {
    crate::linalg::bloch(k).1
}

/// `ρ ↦ −i[H, ρ] + D(ρ)`.
pub fn lindblad_generator(h: &Op, lindblad: &[KrausTerm]) -> Super {
    hamiltonian_superop(h) + dissipator_superop(lindblad)
}
