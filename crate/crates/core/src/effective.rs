//! Analytic low-energy model: Pauli-frame parameters, the three-step
//! diagonalisation of each module, the effective three-qubit Hamiltonian and
//! the projector onto the dressed logical subspace of the full model.
//!
//! Module operators act on `τ ⊗ σ` with `τ^z = +1` on the first dot and
//! `σ^z = +1` for spin up. Tunnel couplings follow `-(t τ^+ + h.c.)` with
//! `τ^+ = |dot 1⟩⟨dot 2|`; since the device Hamiltonian hops with
//! `-(t c†_2 c_1 + h.c.)`, the Pauli-frame coupling is the conjugate of the
//! device one.
//!
//! Logical states are ordered `|D T 3⟩` with index `4 b_D + 2 b_T + b_3` and
//! `b = 0` meaning `σ^z = +1`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndex, Dot, OperatorSet, Orbital, Spin, N_TQD};
use crate::error::{Result, SimError};
use crate::hamiltonian::{build_static, DeviceParams};
use crate::linalg::{dagger, eigh, expm_minus_i, inv_sqrt_psd, kron, kron_all, paulis, CMat, Eigh, ZERO};

const MIN_DENOMINATOR: f64 = 1e-6;

/// Parameters of the Pauli-operator form of the device Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliFrameParams {
    pub omega_r: f64,
    pub eps_d: f64,
    pub t_d: C64,
    pub omega_d_z: f64,
    pub g_d_x: f64,
    pub eps_t: f64,
    pub t_t: C64,
    pub omega_t_z: f64,
    pub g_t_x: f64,
    pub b_t3: [f64; 3],
    pub j0: f64,
    pub j_perp: C64,
    pub j_z: f64,
    pub g_d_ac: f64,
    pub g_t_ac: f64,
    /// Field components the Pauli form ignores (transverse average field,
    /// longitudinal or y gradient).
    pub warnings: Vec<String>,
}

fn checked(term: &str, value: f64) -> Result<f64> {
    if value.abs() < MIN_DENOMINATOR || !value.is_finite() {
        Err(SimError::SmallDenominator { term: term.to_string(), value })
    } else {
        Ok(1.0 / value)
    }
}

pub fn pauli_frame(params: &DeviceParams) -> Result<PauliFrameParams> {
    let d = &params.dqd;
    let t = &params.tqd;
    let (m1, m2, m3) = (t.eps_t1, t.eps_t2, t.eps_t3);
    let (u1, u2, u3) = (t.u_t1, t.u_t2, t.u_t3);
    let (v12, v23, v31) = (t.v_t12, t.v_t23, t.v_t31);
    let t23 = t.t_t23.0;
    let t31 = t.t_t31.0;

    let a1 = checked("U_T2 - V_T23 + eps_T2 - eps_T3", u2 - v23 + m2 - m3)?;
    let a2 = checked("U_T3 - V_T23 - eps_T2 + eps_T3", u3 - v23 - m2 + m3)?;
    let a3 = checked("V_T31 - V_T12 - eps_T2 + eps_T3", v31 - v12 - m2 + m3)?;
    let b1 = checked("U_T1 - V_T31 + eps_T1 - eps_T3", u1 - v31 + m1 - m3)?;
    let b2 = checked("U_T3 - V_T31 - eps_T1 + eps_T3", u3 - v31 - m1 + m3)?;
    let b3 = checked("V_T23 - V_T12 - eps_T1 + eps_T3", v23 - v12 - m1 + m3)?;
    let c3 = checked("V_T12 - V_T23 + eps_T1 - eps_T3", v12 - v23 + m1 - m3)?;
    let c4 = checked("V_T12 - V_T31 + eps_T2 - eps_T3", v12 - v31 + m2 - m3)?;

    let n23 = t23.norm_sqr();
    let n31 = t31.norm_sqr();
    let eps_t = m1 + v31 - m2 - v23 + 0.5 * n23 * (a1 + a2 + 2.0 * a3) - 0.5 * n31 * (b1 + b2 + 2.0 * b3);
    let t_t_dev = t.t_t12.0 + 0.25 * t23 * t31 * (a2 + b2 + b3 + a3);
    let j0 = n31 * (b1 + b2) + n23 * (a1 + a2);
    let j_perp_dev = t23 * t31 * (a2 + b2 + c3 + c4);
    let j_z = n31 * (b1 + b2) - n23 * (a1 + a2);

    let mut warnings = Vec::new();
    let avg = |b1: [f64; 3], b2: [f64; 3], k: usize| 0.5 * (b1[k] + b2[k]);
    let grad = |b1: [f64; 3], b2: [f64; 3], k: usize| 0.25 * (b1[k] - b2[k]);
    for (name, f1, f2) in [("DQD", d.b_d1, d.b_d2), ("TQD", t.b_t1, t.b_t2)] {
        if avg(f1, f2, 0) != 0.0 || avg(f1, f2, 1) != 0.0 {
            warnings.push(format!("{name}: transverse average field ignored by the Pauli form"));
        }
        if grad(f1, f2, 1) != 0.0 || grad(f1, f2, 2) != 0.0 {
            warnings.push(format!("{name}: non-x field gradient ignored by the Pauli form"));
        }
    }

    Ok(PauliFrameParams {
        omega_r: params.omega_r,
        eps_d: d.eps_d1 - d.eps_d2,
        t_d: d.t_d.0.conj(),
        omega_d_z: avg(d.b_d1, d.b_d2, 2),
        g_d_x: grad(d.b_d1, d.b_d2, 0),
        eps_t,
        t_t: t_t_dev.conj(),
        omega_t_z: avg(t.b_t1, t.b_t2, 2),
        g_t_x: grad(t.b_t1, t.b_t2, 0),
        b_t3: t.b_t3,
        j0,
        j_perp: j_perp_dev.conj(),
        j_z,
        g_d_ac: params.g_d_ac,
        g_t_ac: params.g_t_ac,
        warnings,
    })
}

/// Diagonalisation angles and dressed frequencies of one delocalised module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleAngles {
    pub phi: f64,
    pub theta: f64,
    pub omega_a: f64,
    pub alpha: f64,
    pub omega_zp: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub beta: f64,
    pub omega_tau: f64,
    pub omega_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformAngles {
    pub d: ModuleAngles,
    pub t: ModuleAngles,
    pub phi3: f64,
    pub alpha3: f64,
    pub omega3_sigma: f64,
}

/// Pauli-form coefficients of one module: `(ε, t, ω^z, g^x)`.
#[derive(Debug, Clone, Copy)]
pub struct ModuleParams {
    pub eps: f64,
    pub t: C64,
    pub omega_z: f64,
    pub g_x: f64,
}

impl PauliFrameParams {
    pub fn module(&self, dot_pair: Module) -> ModuleParams {
        match dot_pair {
            Module::D => ModuleParams { eps: self.eps_d, t: self.t_d, omega_z: self.omega_d_z, g_x: self.g_d_x },
            Module::T => ModuleParams { eps: self.eps_t, t: self.t_t, omega_z: self.omega_t_z, g_x: self.g_t_x },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    D,
    T,
}

pub fn module_angles(m: ModuleParams) -> ModuleAngles {
    let tn = m.t.norm();
    let phi = if tn == 0.0 { 0.0 } else { m.t.arg() };
    let theta = (-2.0 * tn).atan2(m.eps);
    let omega_a = m.eps.hypot(2.0 * tn);
    let gc = 2.0 * m.g_x * theta.cos();
    let gs = 2.0 * m.g_x * theta.sin();
    let alpha = gc.atan2(m.omega_z);
    let omega_zp = m.omega_z.hypot(gc);
    let beta_plus = (-gs).atan2(omega_a + omega_zp);
    let beta_minus = (-gs).atan2(omega_a - omega_zp);
    let sum = (omega_a + omega_zp).hypot(gs);
    let diff = (omega_a - omega_zp).hypot(gs);
    ModuleAngles {
        phi,
        theta,
        omega_a,
        alpha,
        omega_zp,
        beta_plus,
        beta_minus,
        beta: 0.5 * (beta_plus + beta_minus),
        omega_tau: 0.5 * (sum + diff),
        omega_sigma: 0.5 * (sum - diff),
    }
}

pub fn transform_angles(pf: &PauliFrameParams) -> TransformAngles {
    let b = pf.b_t3;
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    TransformAngles {
        d: module_angles(pf.module(Module::D)),
        t: module_angles(pf.module(Module::T)),
        phi3: if b[0] == 0.0 && b[1] == 0.0 { 0.0 } else { b[1].atan2(b[0]) },
        alpha3: if norm == 0.0 { 0.0 } else { (b[2] / norm).clamp(-1.0, 1.0).acos() },
        omega3_sigma: norm,
    }
}

/// Parameters of the effective three-qubit Hamiltonian (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub omega_d: f64,
    pub omega_t: f64,
    pub omega_3: f64,
    pub j_r: f64,
    pub j_e: f64,
    pub j_zz: f64,
    pub alpha3: f64,
    pub phi3: f64,
}

/// Drive on module D entering the dressed frequencies: `(Ω̃_D, ω_d)` in GHz.
pub type DressingDrive = Option<(f64, f64)>;

fn dressed_frequency(
    a: &ModuleAngles,
    g: f64,
    omega_r: f64,
    drive: DressingDrive,
    static_shift: f64,
) -> Result<f64> {
    let (st, ct) = a.theta.sin_cos();
    let sa = a.alpha.sin();
    let ca = a.alpha.cos();
    let (sbp, cbp) = a.beta_plus.sin_cos();
    let (sbm, cbm) = a.beta_minus.sin_cos();
    let sum = a.omega_tau + a.omega_sigma;
    let diff = a.omega_tau - a.omega_sigma;
    let ws = a.omega_sigma;

    let inv_rs = checked("omega_r^2 - omega_sigma^2", omega_r * omega_r - ws * ws)?;
    let inv_rsum = checked("omega_r + omega_tau + omega_sigma", omega_r + sum)?;
    let inv_rdiff = checked("omega_r + omega_tau - omega_sigma", omega_r + diff)?;
    let (drive_sum, drive_diff) = match drive {
        Some((amp, wd)) if amp != 0.0 => {
            let is = checked("omega_d^2 - (omega_tau + omega_sigma)^2", wd * wd - sum * sum)?;
            let id = checked("omega_d^2 - (omega_tau - omega_sigma)^2", wd * wd - diff * diff)?;
            (0.5 * sum * amp * amp * is, 0.5 * diff * amp * amp * id)
        }
        _ => (0.0, 0.0),
    };
    let x = st * ca * a.beta.sin();
    let p = ct * sbp + st * sa * cbp;
    let m = ct * sbm - st * sa * cbm;
    Ok(ws - 2.0 * ws * g * g * inv_rs * x * x
        + (g * g * inv_rsum - drive_sum) * p * p
        + (drive_diff - g * g * inv_rdiff) * m * m
        + static_shift)
}

fn dipole_sigma_z(a: &ModuleAngles) -> f64 {
    let (st, ct) = a.theta.sin_cos();
    ct * (a.beta_plus.cos() - a.beta_minus.cos()) - st * a.alpha.sin() * (a.beta_plus.sin() + a.beta_minus.sin())
}

fn dipole_tau_z(a: &ModuleAngles) -> f64 {
    let (st, ct) = a.theta.sin_cos();
    ct * (a.beta_plus.cos() + a.beta_minus.cos()) - st * a.alpha.sin() * (a.beta_plus.sin() - a.beta_minus.sin())
}

/// Transverse spin-photon weight `sin θ cos α sin β`.
pub fn spin_charge_mixing(a: &ModuleAngles) -> f64 {
    a.theta.sin() * a.alpha.cos() * a.beta.sin()
}

pub fn effective_params(pf: &PauliFrameParams, ang: &TransformAngles, drive: DressingDrive) -> Result<EffectiveParams> {
    checked("omega_r", pf.omega_r)?;
    let cross = pf.g_d_ac * dipole_tau_z(&ang.d) + pf.g_t_ac * dipole_tau_z(&ang.t);
    let shift_d = pf.g_d_ac / pf.omega_r * dipole_sigma_z(&ang.d) * cross;
    let shift_t = pf.g_t_ac / pf.omega_r * dipole_sigma_z(&ang.t) * cross;
    let omega_d = dressed_frequency(&ang.d, pf.g_d_ac, pf.omega_r, drive, shift_d)?;
    let omega_t = dressed_frequency(&ang.t, pf.g_t_ac, pf.omega_r, None, shift_t)?;

    let wr2 = pf.omega_r * pf.omega_r;
    let inv_d = checked("omega_r^2 - omega_D^2", wr2 - ang.d.omega_sigma.powi(2))?;
    let inv_t = checked("omega_r^2 - omega_T^2", wr2 - ang.t.omega_sigma.powi(2))?;
    let j_r = pf.omega_r * pf.g_d_ac * pf.g_t_ac * spin_charge_mixing(&ang.d) * spin_charge_mixing(&ang.t) * (inv_d + inv_t);

    let t = &ang.t;
    let ca = t.alpha.cos();
    let omega_3 = ang.omega3_sigma - 0.25 * pf.j0 * ca * (t.beta_plus.cos() - t.beta_minus.cos());
    let c_half = (0.5 * (t.beta_minus - t.beta_plus)).cos();
    let transverse = pf.j_z * t.theta.cos() + (pf.j_perp * C64::from_polar(1.0, -t.phi)).re * t.theta.sin();
    let j_e = c_half * ca * pf.j0 - t.beta.cos() * ca * transverse;
    let j_zz = -0.5 * (0.5 * t.beta).sin().powi(2) * ca * (c_half * pf.j0 + transverse);

    Ok(EffectiveParams { omega_d, omega_t, omega_3, j_r, j_e, j_zz, alpha3: ang.alpha3, phi3: ang.phi3 })
}

/// Pauli-frame parameters, angles and effective parameters in one call.
pub fn analyze(params: &DeviceParams, drive: DressingDrive) -> Result<(PauliFrameParams, TransformAngles, EffectiveParams)> {
    let pf = pauli_frame(params)?;
    let ang = transform_angles(&pf);
    let eff = effective_params(&pf, &ang, drive)?;
    Ok((pf, ang, eff))
}

fn op3(which: usize, p: &CMat) -> CMat {
    let id = &paulis()[0];
    let mut f = [id, id, id];
    f[which] = p;
    kron_all(&f)
}

fn rot3(pf_alpha3: f64, phi3: f64) -> Result<CMat> {
    let [_, _, y, z] = paulis();
    // qubit-3 frame: exp(-i φ3/2 σz) exp(-i α3/2 σy)
    Ok(expm_minus_i(&(z * C64::new(0.5 * phi3, 0.0)))?.dot(&expm_minus_i(&(y * C64::new(0.5 * pf_alpha3, 0.0)))?))
}

/// Effective Hamiltonian on the 8-dimensional logical space (GHz).
pub fn build_effective_hamiltonian(eff: &EffectiveParams) -> Result<CMat> {
    let [_, x, y, z] = paulis();
    let r = |v: f64| C64::new(v, 0.0);
    let mut h = op3(0, &z) * r(0.5 * eff.omega_d) + op3(1, &z) * r(0.5 * eff.omega_t) + op3(2, &z) * r(0.5 * eff.omega_3);
    h = h - op3(0, &x).dot(&op3(1, &x)) * r(eff.j_r);
    let mut ex = CMat::zeros((8, 8));
    for p in [&x, &y, &z] {
        ex = ex + op3(1, p).dot(&op3(2, p)) * r(0.25 * eff.j_e);
    }
    ex = ex + op3(1, &z).dot(&op3(2, &z)) * r(eff.j_zz);
    if eff.alpha3 != 0.0 || eff.phi3 != 0.0 {
        let r3 = kron_all(&[&paulis()[0], &paulis()[0], &rot3(eff.alpha3, eff.phi3)?]);
        ex = dagger(&r3).dot(&ex).dot(&r3);
    }
    Ok(h + ex)
}

/// Pauli-form Hamiltonian of one module on `τ ⊗ σ` (4×4).
pub fn module_hamiltonian(m: ModuleParams) -> CMat {
    let [id, x, y, z] = paulis();
    let r = |v: f64| C64::new(v, 0.0);
    let tau_plus = (&x + &y.mapv(|v| v * C64::new(0.0, 1.0))) * r(0.5);
    let hop = kron(&tau_plus, &id) * m.t;
    kron(&z, &id) * r(0.5 * m.eps) - (&hop + &dagger(&hop)) + kron(&id, &z) * r(0.5 * m.omega_z)
        + kron(&z, &x) * r(m.g_x)
}

/// The three frame rotations `(U1, U2, U3)` of one module on `τ ⊗ σ`.
pub fn module_frames(a: &ModuleAngles) -> Result<[CMat; 3]> {
    let [id, x, y, z] = paulis();
    let r = |v: f64| C64::new(v, 0.0);
    let u1 = expm_minus_i(&(kron(&z, &id) * r(-0.5 * a.phi)))?.dot(&expm_minus_i(&(kron(&y, &id) * r(0.5 * a.theta)))?);
    let u2 = expm_minus_i(&(kron(&z, &y) * r(0.5 * a.alpha)))?;
    let gen = kron(&y, &x) * r(0.5 * a.beta) + kron(&x, &y) * r(0.25 * (a.beta_plus - a.beta_minus));
    let u3 = expm_minus_i(&gen)?;
    Ok([u1, u2, u3])
}

/// `U1 U2 U3`; its columns are the module eigenstates labelled by `(τ, σ)`.
pub fn module_frame(a: &ModuleAngles) -> Result<CMat> {
    let [u1, u2, u3] = module_frames(a)?;
    Ok(u1.dot(&u2).dot(&u3))
}

/// Analytic dressed logical states in the bare many-body basis (zero photons,
/// orbital ground state in both modules), one column per logical index.
pub fn reference_states(basis: &BasisIndex, ang: &TransformAngles) -> Result<CMat> {
    let wd = module_frame(&ang.d)?;
    let wt = module_frame(&ang.t)?;
    let w3 = rot3(ang.alpha3, ang.phi3)?;
    let pair_index = |a: Orbital, b: Orbital| -> usize {
        basis.tqd_states.iter().position(|&(x, y)| x == a && y == b).expect("pair in basis")
    };
    let dots_t = [Dot::T1, Dot::T2];
    let dots_d = [Dot::D1, Dot::D2];
    let spins = [Spin::Up, Spin::Down];
    let mut phi = CMat::zeros((basis.total_dim, 8));
    for bd in 0..2 {
        for bt in 0..2 {
            for b3 in 0..2 {
                let col = 4 * bd + 2 * bt + b3;
                // τ = -1 is module row block 1
                let u = wd.column(2 + bd);
                let v = wt.column(2 + bt);
                let w = w3.column(b3);
                for (i, &dd) in dots_d.iter().enumerate() {
                    for (si, &sd) in spins.iter().enumerate() {
                        let cu = u[2 * i + si];
                        if cu == ZERO {
                            continue;
                        }
                        let dqd = basis.dqd_states.iter().position(|&o| o == Orbital::new(dd, sd)).unwrap();
                        for (j, &dt) in dots_t.iter().enumerate() {
                            for (sj, &st) in spins.iter().enumerate() {
                                let cv = v[2 * j + sj];
                                for (s3i, &s3) in spins.iter().enumerate() {
                                    let cw = w[s3i];
                                    let p = pair_index(Orbital::new(dt, st), Orbital::new(Dot::T3, s3));
                                    debug_assert!(p < N_TQD);
                                    phi[[basis.index(dqd, p, 0), col]] += cu * cv * cw;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(phi)
}

/// Isometry from the logical space onto the dressed low-energy subspace of the
/// full static Hamiltonian.
#[derive(Debug, Clone)]
pub struct DressedProjector {
    /// `total_dim × 8`, orthonormal columns.
    pub iso: CMat,
    /// Analytic reference states used for labelling.
    pub reference: CMat,
    /// Full eigendecomposition of the static Hamiltonian.
    pub eig: Eigh,
    /// Indices (into `eig`) of the eigenstates spanning the subspace.
    pub selected: Vec<usize>,
    /// Weight of each selected eigenstate inside the reference subspace.
    pub weights: Vec<f64>,
    /// Largest weight among the rejected eigenstates.
    pub rejected_weight: f64,
}

impl DressedProjector {
    /// `P† H P` (8×8).
    pub fn project(&self, h: &CMat) -> CMat {
        dagger(&self.iso).dot(&h.dot(&self.iso))
    }

    pub fn selected_energies(&self) -> Vec<f64> {
        self.selected.iter().map(|&k| self.eig.values[k]).collect()
    }

    /// Minimum gap between a selected and a rejected eigenvalue.
    pub fn isolation_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (k, &e) in self.eig.values.iter().enumerate() {
            if self.selected.contains(&k) {
                continue;
            }
            for &s in &self.selected {
                gap = gap.min((e - self.eig.values[s]).abs());
            }
        }
        gap
    }
}

/// Build the dressed projector for a static Hamiltonian `h` of `params`.
pub fn dressed_projector_for(h: &CMat, basis: &BasisIndex, ang: &TransformAngles) -> Result<DressedProjector> {
    let reference = reference_states(basis, ang)?;
    let eig = eigh(h)?;
    let overlaps = dagger(&eig.vectors).dot(&reference);
    let mut weights: Vec<(usize, f64)> =
        (0..eig.values.len()).map(|k| (k, overlaps.row(k).iter().map(|z| z.norm_sqr()).sum())).collect();
    weights.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (w8, w9) = (weights[7].1, weights[8].1);
    if w8 < 0.5 || w8 < 2.0 * w9 {
        return Err(SimError::DegenerateSubspace(format!(
            "eighth-largest reference weight {w8:.4} vs ninth {w9:.4}; dressed states hybridise with the rest of the spectrum"
        )));
    }
    let mut selected: Vec<usize> = weights[..8].iter().map(|w| w.0).collect();
    selected.sort_unstable();
    let n = h.nrows();
    let mut vsel = CMat::zeros((n, 8));
    for (c, &k) in selected.iter().enumerate() {
        vsel.column_mut(c).assign(&eig.vectors.column(k));
    }
    let m = dagger(&vsel).dot(&reference);
    let s = inv_sqrt_psd(&dagger(&m).dot(&m))?;
    let iso = vsel.dot(&m.dot(&s));
    let sel_weights = selected.iter().map(|&k| weights.iter().find(|w| w.0 == k).unwrap().1).collect();
    Ok(DressedProjector { iso, reference, eig, selected, weights: sel_weights, rejected_weight: w9 })
}

pub fn dressed_projector(params: &DeviceParams, basis: &BasisIndex, ops: &OperatorSet) -> Result<DressedProjector> {
    let h = build_static(params, ops)?;
    let (_, ang, _) = analyze(params, None)?;
    dressed_projector_for(&h, basis, &ang)
}

/// Coefficients `c_P` of `A = Σ c_P P / 8` in the three-qubit Pauli basis,
/// indexed by `16 p_D + 4 p_T + p_3` with `p ∈ {I, X, Y, Z}`.
pub fn pauli_decompose(a: &CMat) -> Vec<C64> {
    let ps = paulis();
    let mut out = Vec::with_capacity(64);
    for pd in &ps {
        for pt in &ps {
            for p3 in &ps {
                let p = kron_all(&[pd, pt, p3]);
                out.push(crate::linalg::trace(&p.dot(a)) / 8.0);
            }
        }
    }
    out
}

pub fn pauli_index(d: usize, t: usize, q3: usize) -> usize {
    16 * d + 4 * t + q3
}
