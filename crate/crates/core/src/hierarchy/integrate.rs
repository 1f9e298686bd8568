//! Time stepping on a fixed output grid: classical RK4, a fourth-order
//! exponential integrator (Cox–Matthews ETDRK4) that treats
//! `−i[H_S, ·] − Σ n_k γ_k` exactly, or Dormand–Prince 5(4) with step control
//! between output times.

use serde::{Deserialize, Serialize};

use super::rhs::HeomOperator;
use super::{HierarchyError, HierarchyState};
use crate::linalg::{c, Op, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
    /// Exponential RK4; the step is limited by the bath couplings only, not
    /// by the damping of deep or fast ADOs.
    Etd4,
    Dopri45 { rtol: f64, atol: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk4
    }
}

/// `ρ_S` and its exact derivative on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<Op>,
    pub rho_dot: Vec<Op>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            rho: Vec::with_capacity(n),
            rho_dot: Vec::with_capacity(n),
        }
    }

    fn record(&mut self, op: &HeomOperator, state: &HierarchyState) {
        self.times.push(state.time);
        self.rho.push(state.ados[0]);
        self.rho_dot.push(op.system_derivative(&state.ados));
    }

    /// As [`Trajectory::record`] for a state held as `U† X U`.
    fn record_rotated(&mut self, op: &HeomOperator, state: &HierarchyState, u: &Op) {
        let ud = u.adjoint();
        self.times.push(state.time);
        self.rho.push(u * state.ados[0] * ud);
        self.rho_dot.push(u * op.system_derivative(&state.ados) * ud);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `⟨σ_z⟩(t)` along the trajectory.
    pub fn sigma_z(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r[(0, 0)].re - r[(1, 1)].re).collect()
    }
}

const DIVERGENCE_NORM: f64 = 1e12;

fn check_finite(state: &HierarchyState) -> Result<(), HierarchyError> {
    let bad = state
        .ados
        .iter()
        .any(|x| x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() > DIVERGENCE_NORM));
    if bad {
        Err(HierarchyError::Diverged { time: state.time })
    } else {
        Ok(())
    }
}

/// `out = y + a·k`
fn axpy(out: &mut [Op], y: &[Op], a: f64, k: &[Op]) {
    let a = c(a, 0.0);
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + ki * a;
    }
}

/// Propagate `state` in steps of `dt` up to `t_final`, recording every
/// `stride` steps (the starting time included). The grid is
/// `t₀ + j·stride·dt`; a final partial stride is not taken.
pub fn propagate(
    state: &mut HierarchyState,
    op: &HeomOperator,
    dt: f64,
    t_final: f64,
    stride: usize,
    integrator: Integrator,
) -> Result<Trajectory, HierarchyError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(HierarchyError::Invalid(format!("dt = {dt} must be positive")));
    }
    if stride == 0 {
        return Err(HierarchyError::Invalid("output stride must be ≥ 1".into()));
    }
    if state.ados.len() != op.table.len() {
        return Err(HierarchyError::ShapeMismatch {
            got: state.ados.len(),
            expected: op.table.len(),
        });
    }
    let t0 = state.time;
    let span = t_final - t0;
    // Tolerate round-off in t_final / dt.
    let steps = ((span / dt) * (1.0 + 1e-12)).floor().max(0.0) as usize;
    let n_out = steps / stride;
    let mut traj = Trajectory::with_capacity(n_out + 1);
    traj.record(op, state);
    match integrator {
        Integrator::Rk4 => {
            let mut rk = Rk4Buffers::new(state.ados.len());
            for out in 1..=n_out {
                for s in 0..stride {
                    let step = (out - 1) * stride + s;
                    rk.step(op, &mut state.ados, dt);
                    state.time = t0 + (step + 1) as f64 * dt;
                }
                check_finite(state)?;
                traj.record(op, state);
            }
        }
        Integrator::Etd4 => {
            let mut etd = Etd4::new(op, dt);
            let rop = op.in_basis(&etd.u);
            etd.rotate(&mut state.ados, false);
            let run = (|| -> Result<(), HierarchyError> {
                for out in 1..=n_out {
                    for s in 0..stride {
                        let step = (out - 1) * stride + s;
                        etd.step(&rop, &mut state.ados);
                        state.time = t0 + (step + 1) as f64 * dt;
                    }
                    check_finite(state)?;
                    traj.record_rotated(&rop, state, &etd.u);
                }
                Ok(())
            })();
            etd.rotate(&mut state.ados, true);
            run?;
        }
        Integrator::Dopri45 { rtol, atol } => {
            let mut dp = Dopri::new(state.ados.len(), rtol, atol, dt);
            for out in 1..=n_out {
                let target = t0 + (out * stride) as f64 * dt;
                dp.advance_to(op, state, target)?;
                check_finite(state)?;
                traj.record(op, state);
            }
        }
    }
    Ok(traj)
}

struct Rk4Buffers {
    k1: Vec<Op>,
    k2: Vec<Op>,
    k3: Vec<Op>,
    k4: Vec<Op>,
    tmp: Vec<Op>,
}

impl Rk4Buffers {
    fn new(n: usize) -> Self {
        let z = vec![Op::zeros(); n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, op: &HeomOperator, y: &mut [Op], h: f64) {
        op.apply(y, &mut self.k1);
        axpy(&mut self.tmp, y, 0.5 * h, &self.k1);
        op.apply(&self.tmp, &mut self.k2);
        axpy(&mut self.tmp, y, 0.5 * h, &self.k2);
        op.apply(&self.tmp, &mut self.k3);
        axpy(&mut self.tmp, y, h, &self.k3);
        op.apply(&self.tmp, &mut self.k4);
        let (a, b) = (c(h / 6.0, 0.0), c(h / 3.0, 0.0));
        for i in 0..y.len() {
            y[i] += (self.k1[i] + self.k4[i]) * a + (self.k2[i] + self.k3[i]) * b;
        }
    }
}

/// `(φ₁, φ₂, φ₃)(z)` with `φ_k(z) = Σ_m z^m / (m + k)!`.
fn phi_functions(z: C64) -> (C64, C64, C64) {
    if z.norm() < 1.0 {
        let (mut p1, mut p2, mut p3) = (C64::default(), C64::default(), C64::default());
        // Horner in reverse; 1/(m+k)! terms up to m = 20.
        for m in (0..=20).rev() {
            let f = |k: i32| {
                let mut d = 1.0;
                for j in 1..=(m + k) {
                    d *= j as f64;
                }
                1.0 / d
            };
            p1 = p1 * z + f(1);
            p2 = p2 * z + f(2);
            p3 = p3 * z + f(3);
        }
        (p1, p2, p3)
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - z * z * 0.5) / (z * z * z);
        (p1, p2, p3)
    }
}

/// Scalar ETDRK4 weights for one linear rate.
#[derive(Debug, Clone, Copy, Default)]
struct EtdCoef {
    e: C64,
    e_half: C64,
    q: C64,
    f1: C64,
    f2: C64,
    f3: C64,
}

impl EtdCoef {
    fn new(lambda: C64, h: f64) -> Self {
        let z = lambda * h;
        let (p1, p2, p3) = phi_functions(z);
        let (h1, _, _) = phi_functions(z * 0.5);
        Self {
            e: z.exp(),
            e_half: (z * 0.5).exp(),
            q: h1 * (0.5 * h),
            f1: (p1 - p2 * 3.0 + p3 * 4.0) * h,
            f2: (p2 - p3 * 2.0) * (2.0 * h),
            f3: (p3 * 4.0 - p2) * h,
        }
    }
}

/// Element class of a 2×2 entry: diagonal, upper, lower.
const CLASS: [[usize; 2]; 2] = [[0, 1], [2, 0]];

struct Etd4 {
    /// Eigenvectors of `H_S` as columns.
    u: Op,
    coef: Vec<[EtdCoef; 3]>,
    fu: Vec<Op>,
    a: Vec<Op>,
    fa: Vec<Op>,
    b: Vec<Op>,
    fb: Vec<Op>,
    cs: Vec<Op>,
    fc: Vec<Op>,
}

impl Etd4 {
    fn new(op: &HeomOperator, h: f64) -> Self {
        let eig = nalgebra::SymmetricEigen::new(op.h);
        let (e0, e1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        let w = e0 - e1;
        let coef = op
            .table
            .damping
            .iter()
            .map(|&d| {
                [
                    EtdCoef::new(-d, h),
                    EtdCoef::new(c(-d.re, -d.im - w), h),
                    EtdCoef::new(c(-d.re, -d.im + w), h),
                ]
            })
            .collect();
        let z = vec![Op::zeros(); op.table.len()];
        Self {
            u: eig.eigenvectors,
            coef,
            fu: z.clone(),
            a: z.clone(),
            fa: z.clone(),
            b: z.clone(),
            fb: z.clone(),
            cs: z.clone(),
            fc: z,
        }
    }

    /// `X → U† X U`, or back with `inverse`.
    fn rotate(&self, ados: &mut [Op], inverse: bool) {
        let (l, r) = if inverse {
            (self.u, self.u.adjoint())
        } else {
            (self.u.adjoint(), self.u)
        };
        for x in ados.iter_mut() {
            *x = l * *x * r;
        }
    }

    fn step(&mut self, op: &HeomOperator, y: &mut [Op]) {
        let n = y.len();
        let coef = &self.coef;
        let each = |out: &mut [Op], f: &dyn Fn(usize, &EtdCoef, usize, usize) -> C64| {
            for (i, o) in out.iter_mut().enumerate() {
                for r in 0..2 {
                    for col in 0..2 {
                        o[(r, col)] = f(i, &coef[i][CLASS[r][col]], r, col);
                    }
                }
            }
        };
        op.apply_coupling(y, &mut self.fu);
        {
            let (yy, fu) = (&*y, &self.fu);
            each(&mut self.a, &|i, k, r, col| k.e_half * yy[i][(r, col)] + k.q * fu[i][(r, col)]);
        }
        op.apply_coupling(&self.a, &mut self.fa);
        {
            let (yy, fa) = (&*y, &self.fa);
            each(&mut self.b, &|i, k, r, col| k.e_half * yy[i][(r, col)] + k.q * fa[i][(r, col)]);
        }
        op.apply_coupling(&self.b, &mut self.fb);
        {
            let (a, fu, fb) = (&self.a, &self.fu, &self.fb);
            each(&mut self.cs, &|i, k, r, col| {
                k.e_half * a[i][(r, col)] + k.q * (fb[i][(r, col)] * 2.0 - fu[i][(r, col)])
            });
        }
        op.apply_coupling(&self.cs, &mut self.fc);
        for i in 0..n {
            let k = &coef[i];
            let x = &mut y[i];
            for r in 0..2 {
                for col in 0..2 {
                    let k = &k[CLASS[r][col]];
                    x[(r, col)] = k.e * x[(r, col)]
                        + k.f1 * self.fu[i][(r, col)]
                        + k.f2 * (self.fa[i][(r, col)] + self.fb[i][(r, col)])
                        + k.f3 * self.fc[i][(r, col)];
                }
            }
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri {
    k: [Vec<Op>; 7],
    tmp: Vec<Op>,
    y_new: Vec<Op>,
    rtol: f64,
    atol: f64,
    h: f64,
    fsal_valid: bool,
}

impl Dopri {
    fn new(n: usize, rtol: f64, atol: f64, h0: f64) -> Self {
        let z = vec![Op::zeros(); n];
        Self {
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
            rtol,
            atol,
            h: h0,
            fsal_valid: false,
        }
    }

    fn stage(&mut self, op: &HeomOperator, y: &[Op], h: f64, coeffs: &[f64], target: usize) {
        for i in 0..y.len() {
            let mut acc = y[i];
            for (j, &a) in coeffs.iter().enumerate() {
                if a != 0.0 {
                    acc += self.k[j][i] * c(h * a, 0.0);
                }
            }
            self.tmp[i] = acc;
        }
        op.apply(&self.tmp, &mut self.k[target]);
    }

    fn advance_to(&mut self, op: &HeomOperator, state: &mut HierarchyState, target: f64) -> Result<(), HierarchyError> {
        while state.time < target {
            let remaining = target - state.time;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h < 1e-14 * target.abs().max(1.0) {
                return Err(HierarchyError::StepUnderflow { time: state.time, step: h });
            }
            if !self.fsal_valid {
                op.apply(&state.ados, &mut self.k[0]);
            }
            let y = state.ados.clone();
            self.stage(op, &y, h, &[A21], 1);
            self.stage(op, &y, h, &[A31, A32], 2);
            self.stage(op, &y, h, &[A41, A42, A43], 3);
            self.stage(op, &y, h, &[A51, A52, A53, A54], 4);
            self.stage(op, &y, h, &[A61, A62, A63, A64, A65], 5);
            for i in 0..y.len() {
                self.y_new[i] = y[i]
                    + (self.k[0][i] * c(B1, 0.0)
                        + self.k[2][i] * c(B3, 0.0)
                        + self.k[3][i] * c(B4, 0.0)
                        + self.k[4][i] * c(B5, 0.0)
                        + self.k[5][i] * c(B6, 0.0))
                        * c(h, 0.0);
            }
            op.apply(&self.y_new, &mut self.k[6]);
            // Scaled RMS error, summed in index order.
            let mut err2 = 0.0;
            let mut count = 0usize;
            for i in 0..y.len() {
                let e = (self.k[0][i] * c(E1, 0.0)
                    + self.k[2][i] * c(E3, 0.0)
                    + self.k[3][i] * c(E4, 0.0)
                    + self.k[4][i] * c(E5, 0.0)
                    + self.k[5][i] * c(E6, 0.0)
                    + self.k[6][i] * c(E7, 0.0))
                    * c(h, 0.0);
                for (ev, (yv, nv)) in e.iter().zip(y[i].iter().zip(self.y_new[i].iter())) {
                    let sc = self.atol + self.rtol * yv.norm().max(nv.norm());
                    err2 += (ev.norm() / sc).powi(2);
                    count += 1;
                }
            }
            let err = (err2 / count as f64).sqrt();
            if !err.is_finite() {
                return Err(HierarchyError::Diverged { time: state.time });
            }
            if err <= 1.0 {
                state.ados.copy_from_slice(&self.y_new);
                state.time = if last { target } else { state.time + h };
                self.k.swap(0, 6);
                self.fsal_valid = true;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * factor;
                } else {
                    // Keep the controller's proposal rather than the clipped step.
                    self.h = self.h.max(h * factor.min(1.0));
                }
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        Ok(())
    }
}
