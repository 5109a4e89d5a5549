//! Fidelity and unitarity of projected evolutions, with optimization over
//! local single-qubit gauges.
//!
//! Qubits are ordered `(D, T, 3)` and basis index `k = 4 b_D + 2 b_T + b_3`,
//! with `b = 0` the `σ_z = +1` state.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::linalg::{dagger, kron_all, paulis, trace, CMat};
use crate::optimize::{minimize, SimplexOptions};

pub const N_QUBITS: usize = 3;
pub const DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    #[default]
    ZOnly,
    FullSu2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub process_fidelity: f64,
    pub transformation_fidelity: f64,
    pub average_gate_fidelity: f64,
    pub unitarity: f64,
    /// Z-only: `[pre_D, pre_T, pre_3, post_D, post_T, post_3, global]`.
    /// Full SU(2): ZYZ Euler angles, pre then post per qubit, then global.
    pub local_params: Vec<f64>,
    pub gauge: Gauge,
    pub converged: bool,
    pub time: f64,
}

fn check_dims(a: &CMat, b: &CMat) -> Result<usize> {
    let d = a.nrows();
    if d == 0 {
        return Err(SimError::param("U", "empty operator"));
    }
    if a.ncols() != d || b.nrows() != d || b.ncols() != d {
        return Err(SimError::param("U", "dimension mismatch"));
    }
    Ok(d)
}

fn overlap(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `|Tr(U_a† U_b)|² / d²`.
pub fn process_fidelity(ua: &CMat, ub: &CMat) -> Result<f64> {
    let d = check_dims(ua, ub)? as f64;
    Ok(overlap(ua, ub).norm_sqr() / (d * d))
}

/// `(d F_e + 1)/(d + 1)`.
pub fn transformation_fidelity(ua: &CMat, ub: &CMat) -> Result<f64> {
    let d = check_dims(ua, ub)? as f64;
    Ok((d * process_fidelity(ua, ub)? + 1.0) / (d + 1.0))
}

/// `(Tr(U U†) + |Tr(U† G)|²) / (d (d + 1))`; valid for sub-unitary `U`.
pub fn average_gate_fidelity(u: &CMat, goal: &CMat) -> Result<f64> {
    let d = check_dims(u, goal)? as f64;
    let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    Ok((norm + overlap(u, goal).norm_sqr()) / (d * (d + 1.0)))
}

/// `Tr(U† U) / d`.
pub fn unitarity(u: &CMat) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>() / u.nrows() as f64
}

/// `σ_z` eigenvalue of `qubit` in basis state `k`.
fn z_sign(k: usize, qubit: usize) -> f64 {
    if (k >> (N_QUBITS - 1 - qubit)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of `⊗_q exp(-i φ_q σ_z / 2)`.
pub fn z_phases(phi: &[f64]) -> [C64; DIM] {
    std::array::from_fn(|k| {
        let a: f64 = (0..N_QUBITS).map(|q| phi[q] * z_sign(k, q)).sum();
        C64::from_polar(1.0, -0.5 * a)
    })
}

pub fn z_rotation(phi: &[f64]) -> CMat {
    let d = z_phases(phi);
    CMat::from_shape_fn((DIM, DIM), |(i, j)| if i == j { d[i] } else { C64::new(0.0, 0.0) })
}

/// `R_z(a) R_y(b) R_z(c)`.
pub fn su2(a: f64, b: f64, c: f64) -> CMat {
    let rz = |x: f64| {
        let mut m = CMat::zeros((2, 2));
        m[[0, 0]] = C64::from_polar(1.0, -0.5 * x);
        m[[1, 1]] = C64::from_polar(1.0, 0.5 * x);
        m
    };
    let mut ry = CMat::zeros((2, 2));
    let (s, c2) = (0.5 * b).sin_cos();
    ry[[0, 0]] = C64::new(c2, 0.0);
    ry[[0, 1]] = C64::new(-s, 0.0);
    ry[[1, 0]] = C64::new(s, 0.0);
    ry[[1, 1]] = C64::new(c2, 0.0);
    rz(a).dot(&ry).dot(&rz(c))
}

fn local_su2(angles: &[f64]) -> CMat {
    let ops: Vec<CMat> = (0..N_QUBITS).map(|q| su2(angles[3 * q], angles[3 * q + 1], angles[3 * q + 2])).collect();
    kron_all(&[&ops[0], &ops[1], &ops[2]])
}

/// `e^{iφ_0} · post · U · pre` for the given gauge parameters.
pub fn apply_gauge(u: &CMat, gauge: Gauge, params: &[f64]) -> CMat {
    match gauge {
        Gauge::ZOnly => {
            let pre = z_phases(&params[0..3]);
            let post = z_phases(&params[3..6]);
            let g = C64::from_polar(1.0, params.get(6).copied().unwrap_or(0.0));
            CMat::from_shape_fn((DIM, DIM), |(i, j)| g * post[i] * u[[i, j]] * pre[j])
        }
        Gauge::FullSu2 => {
            let pre = local_su2(&params[0..9]);
            let post = local_su2(&params[9..18]);
            let g = C64::from_polar(1.0, params.get(18).copied().unwrap_or(0.0));
            post.dot(u).dot(&pre).mapv(|z| z * g)
        }
    }
}

fn report(u: &CMat, goal: &CMat, gauge: Gauge, mut params: Vec<f64>, converged: bool, time: f64) -> Result<FidelityReport> {
    let n = params.len();
    params[n - 1] = 0.0;
    let v = apply_gauge(u, gauge, &params);
    // the global phase only aligns Tr(U†G); average gate fidelity ignores it
    params[n - 1] = overlap(&v, goal).arg();
    let v = apply_gauge(u, gauge, &params);
    Ok(FidelityReport {
        process_fidelity: process_fidelity(&v, goal)?,
        transformation_fidelity: transformation_fidelity(&v, goal)?,
        average_gate_fidelity: average_gate_fidelity(&v, goal)?,
        unitarity: unitarity(u),
        local_params: params,
        gauge,
        converged,
        time,
    })
}

/// Metrics without any local correction.
pub fn evaluate(u: &CMat, goal: &CMat, time: f64) -> Result<FidelityReport> {
    check_dims(u, goal)?;
    report(u, goal, Gauge::ZOnly, vec![0.0; 7], true, time)
}

fn z_objective(u: &CMat, goal: &CMat) -> impl Fn(&[f64]) -> f64 + use<> {
    // |Tr((post U pre)† G)|² = |Σ conj(post_i pre_j U_ij) G_ij|²
    let w: Vec<C64> = u.iter().zip(goal.iter()).map(|(a, b)| a.conj() * b).collect();
    move |x: &[f64]| {
        let pre = z_phases(&x[0..3]);
        let post = z_phases(&x[3..6]);
        let mut s = C64::new(0.0, 0.0);
        for i in 0..DIM {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..DIM {
                row += w[i * DIM + j] * pre[j].conj();
            }
            s += row * post[i].conj();
        }
        -s.norm_sqr()
    }
}

/// The deterministic start lattice: post phases in `{0, π}³`.
fn z_starts() -> Vec<Vec<f64>> {
    (0..8)
        .map(|m| {
            let mut x = vec![0.0; 6];
            for q in 0..3 {
                if (m >> q) & 1 == 1 {
                    x[3 + q] = PI;
                }
            }
            x
        })
        .collect()
}

const GAUGE_TOL: f64 = 1e-10;

fn optimize_z(u: &CMat, goal: &CMat) -> Result<(Vec<f64>, bool)> {
    let f = z_objective(u, goal);
    let opts = SimplexOptions { step: 0.4, tolerance: GAUGE_TOL * 1e-2, max_iters: 3000 };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for x0 in z_starts() {
        let m = minimize(&f, &x0, opts)?;
        // one polishing restart from the optimum guards against simplex collapse
        let m2 = minimize(&f, &m.x, SimplexOptions { step: 0.05, ..opts })?;
        let (x, v, c) = if m2.value < m.value { (m2.x, m2.value, m2.converged) } else { (m.x, m.value, m.converged) };
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v, c));
        }
    }
    let (x, v, c) = best.expect("non-empty start set");
    // never worse than no correction
    if v > f(&[0.0; 6]) {
        return Ok((vec![0.0; 6], c));
    }
    Ok((x, c))
}

/// Maximize the average gate fidelity of `gauge(U)` against `goal`.
pub fn optimize_local(u: &CMat, goal: &CMat, gauge: Gauge, time: f64) -> Result<FidelityReport> {
    check_dims(u, goal)?;
    if u.nrows() != DIM {
        return Err(SimError::param("U", "local gauges are defined for three qubits"));
    }
    let (zx, zconv) = optimize_z(u, goal)?;
    if gauge == Gauge::ZOnly {
        let mut p = zx;
        p.push(0.0);
        let r = report(u, goal, gauge, p, zconv, time)?;
        if !zconv {
            log::warn!("local Z optimization did not converge at t = {time} ns");
        }
        return Ok(r);
    }
    // seed the SU(2) search with the Z optimum: R_z(a) R_y(0) R_z(0) = R_z(a)
    let mut x0 = vec![0.0; 18];
    for q in 0..3 {
        x0[3 * q] = zx[q];
        x0[9 + 3 * q] = zx[3 + q];
    }
    let f = |x: &[f64]| -overlap(&apply_gauge(u, Gauge::FullSu2, x), goal).norm_sqr();
    let opts = SimplexOptions { step: 0.3, tolerance: GAUGE_TOL * 1e-2, max_iters: 20000 };
    let mut m = minimize(f, &x0, opts)?;
    for _ in 0..3 {
        let m2 = minimize(f, &m.x, SimplexOptions { step: 0.1, ..opts })?;
        let done = m.value - m2.value < GAUGE_TOL * 1e-2;
        if m2.value < m.value {
            m = m2;
        }
        if done {
            break;
        }
    }
    let mut p = if m.value <= f(&x0) { m.x } else { x0 };
    p.push(0.0);
    report(u, goal, gauge, p, m.converged, time)
}

pub mod gates {
    //! Target gates on the `(D, T, 3)` register.
    use super::*;

    fn diag(d: [f64; 8]) -> CMat {
        CMat::from_shape_fn((8, 8), |(i, j)| if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn identity() -> CMat {
        diag([1.0; 8])
    }

    /// `I_D ⊗ CZ_{T3}`.
    pub fn cz_t3() -> CMat {
        diag([1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0])
    }

    /// CNOT with control D and target T, tensored with `I_3`.
    pub fn cnot_dt() -> CMat {
        let [id, x, _, _] = paulis();
        let mut p0 = CMat::zeros((2, 2));
        p0[[0, 0]] = C64::new(1.0, 0.0);
        let mut p1 = CMat::zeros((2, 2));
        p1[[1, 1]] = C64::new(1.0, 0.0);
        kron_all(&[&p0, &id, &id]) + kron_all(&[&p1, &x, &id])
    }
}

/// Largest average gate fidelity of `goal` reachable from the identity with
/// the given gauge: the bound for evolutions that create no entanglement.
pub fn local_bound(goal: &CMat, gauge: Gauge) -> Result<f64> {
    Ok(optimize_local(&gates::identity(), goal, gauge, 0.0)?.average_gate_fidelity)
}

/// `Tr(U† U)` consistency helper used by callers that store traces.
pub fn trace_overlap(a: &CMat, b: &CMat) -> C64 {
    trace(&dagger(a).dot(b))
}
