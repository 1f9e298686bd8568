//! Small dense complex matrices: qubit operators and their superoperators.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

pub type C64 = Complex64;
/// Operator on the qubit Hilbert space.
pub type Op = Matrix2<C64>;
/// Superoperator on qubit operators (4×4).
pub type Super = Matrix4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity() -> Op {
    Op::identity()
}

pub fn sigma_x() -> Op {
    Op::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Op {
    Op::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Op {
    Op::new(ONE, ZERO, ZERO, -ONE)
}

/// `|0⟩⟨0|`, `|1⟩⟨1|`, `|+⟩⟨+|`, `|+i⟩⟨+i|`.
pub fn projector(name: &str) -> Option<Op> {
    let half = C64::new(0.5, 0.0);
    match name {
        "ground" | "0" => Some(Op::new(ONE, ZERO, ZERO, ZERO)),
        "excited" | "1" => Some(Op::new(ZERO, ZERO, ZERO, ONE)),
        "plus" | "+" => Some(Op::new(half, half, half, half)),
        "plus_i" | "+i" => Some(Op::new(half, -half * I, half * I, half)),
        _ => None,
    }
}

pub fn commutator(a: &Op, b: &Op) -> Op {
    a * b - b * a
}

pub fn anticommutator(a: &Op, b: &Op) -> Op {
    a * b + b * a
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &Op, b: &Op) -> C64 {
    a[(0, 0)] * b[(0, 0)] + a[(0, 1)] * b[(1, 0)] + a[(1, 0)] * b[(0, 1)] + a[(1, 1)] * b[(1, 1)]
}

pub fn hermiticity_residual(a: &Op) -> f64 {
    (a - a.adjoint()).norm()
}

/// Orthonormal Pauli basis `{I, σx, σy, σz}/√2`.
pub fn pauli_basis() -> [Op; 4] {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [identity() * s, sigma_x() * s, sigma_y() * s, sigma_z() * s]
}

/// Coordinates `Tr(P_i X)` in the orthonormal Pauli basis.
pub fn to_pauli(x: &Op) -> Vector4<C64> {
    let basis = pauli_basis();
    Vector4::from_fn(|i, _| trace_product(&basis[i], x))
}

pub fn from_pauli(v: &Vector4<C64>) -> Op {
    let basis = pauli_basis();
    basis
        .iter()
        .zip(v.iter())
        .fold(Op::zeros(), |acc, (p, &vi)| acc + p * vi)
}

/// Matrix of a linear map on operators in the orthonormal Pauli basis.
pub fn superop_matrix<F: Fn(&Op) -> Op>(map: F) -> Super {
    let basis = pauli_basis();
    let mut m = Super::zeros();
    for (j, p) in basis.iter().enumerate() {
        let col = to_pauli(&map(p));
        m.set_column(j, &col);
    }
    m
}

pub fn apply_superop(m: &Super, x: &Op) -> Op {
    from_pauli(&(m * to_pauli(x)))
}

/// Hamiltonian superoperator `ρ ↦ −i[H, ρ]` in the Pauli basis.
pub fn hamiltonian_superop(h: &Op) -> Super {
    superop_matrix(|x| commutator(h, x) * (-I))
}

/// Real Bloch decomposition `a = m I + v·σ` of a Hermitian operator.
/// Imaginary residues are discarded.
pub fn bloch(a: &Op) -> (f64, [f64; 3]) {
    let m = 0.5 * (a[(0, 0)].re + a[(1, 1)].re);
    let vz = 0.5 * (a[(0, 0)].re - a[(1, 1)].re);
    let off = 0.5 * (a[(1, 0)] + a[(0, 1)].conj());
    (m, [off.re, off.im, vz])
}

pub fn from_bloch(m: f64, v: [f64; 3]) -> Op {
    identity() * c(m, 0.0) + sigma_x() * c(v[0], 0.0) + sigma_y() * c(v[1], 0.0) + sigma_z() * c(v[2], 0.0)
}

/// Eigenvalues (ascending) of a 2×2 Hermitian operator.
pub fn hermitian_eigenvalues(a: &Op) -> [f64; 2] {
    let (m, v) = bloch(a);
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [m - r, m + r]
}

/// Apply a real function to a 2×2 Hermitian operator through its spectrum.
pub fn hermitian_function<F: Fn(f64) -> f64>(a: &Op, f: F) -> Op {
    let (m, v) = bloch(a);
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r == 0.0 {
        return identity() * c(f(m), 0.0);
    }
    let (fp, fm) = (f(m + r), f(m - r));
    let scale = 0.5 * (fp - fm) / r;
    from_bloch(0.5 * (fp + fm), [v[0] * scale, v[1] * scale, v[2] * scale])
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)` of a Pauli-basis superoperator.
/// Row/column index `(i, a)` maps to `2 i + a`.
pub fn choi_from_superop(s: &Super) -> Super {
    let mut choi = Super::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let mut unit = Op::zeros();
            unit[(i, j)] = ONE;
            let image = apply_superop(s, &unit);
            for a in 0..2 {
                for b in 0..2 {
                    choi[(2 * i + a, 2 * j + b)] = image[(a, b)];
                }
            }
        }
    }
    choi
}

/// Inverse of [`choi_from_superop`].
pub fn superop_from_choi(choi: &Super) -> Super {
    superop_matrix(|x| {
        let mut out = Op::zeros();
        for i in 0..2 {
            for j in 0..2 {
                if x[(i, j)] == ZERO {
                    continue;
                }
                for a in 0..2 {
                    for b in 0..2 {
                        out[(a, b)] += x[(i, j)] * choi[(2 * i + a, 2 * j + b)];
                    }
                }
            }
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (sigma_x(), sigma_y(), sigma_z());
        assert!((x * y - z * I).norm() < 1e-15);
        assert!((commutator(&x, &y) - z * (I * 2.0)).norm() < 1e-15);
        assert!((anticommutator(&z, &z) - identity() * c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pauli_round_trip() {
        let a = Op::new(c(0.3, 0.1), c(-1.0, 2.0), c(0.5, -0.25), c(2.0, 0.0));
        assert!((from_pauli(&to_pauli(&a)) - a).norm() < 1e-14);
        assert!((trace_product(&a, &a) - (a * a).trace()).norm() < 1e-14);
    }

    #[test]
    fn hamiltonian_superop_annihilates_trace_row() {
        let h = sigma_x() * c(0.2, 0.0) - sigma_z() * c(0.5, 0.0);
        let l = hamiltonian_superop(&h);
        for j in 0..4 {
            assert!(l[(0, j)].norm() < 1e-15);
        }
        // Real antisymmetric rotation generator in the Pauli basis.
        for i in 0..4 {
            for j in 0..4 {
                assert!(l[(i, j)].im.abs() < 1e-15);
                assert!((l[(i, j)] + l[(j, i)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn choi_round_trip() {
        let h = sigma_y() * c(0.7, 0.0);
        let l = hamiltonian_superop(&h);
        let back = superop_from_choi(&choi_from_superop(&l));
        assert!((back - l).norm() < 1e-14);
    }

    #[test]
    fn hermitian_function_matches_spectrum() {
        let a = from_bloch(0.5, [0.1, -0.2, 0.3]);
        let [lo, hi] = hermitian_eigenvalues(&a);
        let sq = hermitian_function(&a, |x| x * x);
        assert!((sq - a * a).norm() < 1e-14);
        assert!((lo + hi - 1.0).abs() < 1e-15);
        let log = hermitian_function(&a, f64::ln);
        let back = hermitian_function(&log, f64::exp);
        assert!((back - a).norm() < 1e-13);
    }
}
