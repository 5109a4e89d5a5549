//! Device parameters and assembly of the full Fermi-Hubbard + resonator
//! Hamiltonian.
//!
//! Zeeman terms are built as `½ B·S` with Pauli-normalised `S`, so a field of
//! magnitude `|B|` (GHz) splits a single spin by exactly `|B|`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::{Dot, OperatorSet};
use crate::error::{Result, SimError};
use crate::linalg::{dagger, is_hermitian, CMat, ZERO};

/// Complex tunnel coupling; accepts either a number or `[re, im]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tunnel(pub C64);

impl Tunnel {
    pub fn real(x: f64) -> Self {
        Tunnel(C64::new(x, 0.0))
    }
}

impl Serialize for Tunnel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Tunnel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Pair([f64; 2]),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Real(x) => Tunnel(C64::new(x, 0.0)),
            Repr::Pair([re, im]) => Tunnel(C64::new(re, im)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqdParams {
    #[serde(rename = "eps_D1_GHz")]
    pub eps_d1: f64,
    #[serde(rename = "eps_D2_GHz")]
    pub eps_d2: f64,
    #[serde(rename = "t_D_GHz")]
    pub t_d: Tunnel,
    #[serde(rename = "B_D1_GHz")]
    pub b_d1: [f64; 3],
    #[serde(rename = "B_D2_GHz")]
    pub b_d2: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TqdParams {
    #[serde(rename = "eps_T1_GHz")]
    pub eps_t1: f64,
    #[serde(rename = "eps_T2_GHz")]
    pub eps_t2: f64,
    #[serde(rename = "eps_T3_GHz")]
    pub eps_t3: f64,
    #[serde(rename = "U_T1_GHz")]
    pub u_t1: f64,
    #[serde(rename = "U_T2_GHz")]
    pub u_t2: f64,
    #[serde(rename = "U_T3_GHz")]
    pub u_t3: f64,
    #[serde(rename = "V_T12_GHz", default)]
    pub v_t12: f64,
    #[serde(rename = "V_T23_GHz", default)]
    pub v_t23: f64,
    #[serde(rename = "V_T31_GHz", default)]
    pub v_t31: f64,
    #[serde(rename = "t_T12_GHz")]
    pub t_t12: Tunnel,
    #[serde(rename = "t_T23_GHz")]
    pub t_t23: Tunnel,
    #[serde(rename = "t_T31_GHz", default)]
    pub t_t31: Tunnel,
    #[serde(rename = "B_T1_GHz")]
    pub b_t1: [f64; 3],
    #[serde(rename = "B_T2_GHz")]
    pub b_t2: [f64; 3],
    #[serde(rename = "B_T3_GHz")]
    pub b_t3: [f64; 3],
}

fn default_margin() -> f64 {
    10.0
}

/// Physical parameters of the device. All energies are `E/h` in GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    #[serde(rename = "omega_r_GHz")]
    pub omega_r: f64,
    pub dqd: DqdParams,
    pub tqd: TqdParams,
    #[serde(rename = "g_D_AC_GHz")]
    pub g_d_ac: f64,
    #[serde(rename = "g_T_AC_GHz")]
    pub g_t_ac: f64,
    pub n_r: usize,
    /// Permit a T3-T1 tunnel coupling (closed-loop geometry).
    #[serde(default)]
    pub allow_t31: bool,
    /// Required ratio between charge-configuration gaps and the largest TQD
    /// tunnel coupling.
    #[serde(default = "default_margin")]
    pub localization_margin: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tqd;
        let finite = [
            self.omega_r,
            self.dqd.eps_d1,
            self.dqd.eps_d2,
            t.eps_t1,
            t.eps_t2,
            t.eps_t3,
            t.u_t1,
            t.u_t2,
            t.u_t3,
            t.v_t12,
            t.v_t23,
            t.v_t31,
            self.g_d_ac,
            self.g_t_ac,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(SimError::param("device", "non-finite parameter"));
        }
        if self.n_r < 1 {
            return Err(SimError::param("n_r", "resonator truncation must be at least 1"));
        }
        for (name, v) in [
            ("U_T1", t.u_t1),
            ("U_T2", t.u_t2),
            ("U_T3", t.u_t3),
            ("V_T12", t.v_t12),
            ("V_T23", t.v_t23),
            ("V_T31", t.v_t31),
        ] {
            if v < 0.0 {
                return Err(SimError::param(name, "Coulomb energies must be non-negative"));
            }
        }
        if self.omega_r <= 0.0 {
            return Err(SimError::param("omega_r", "resonator frequency must be positive"));
        }
        if t.t_t31.0 != ZERO && !self.allow_t31 {
            return Err(SimError::param("t_T31", "linear TQD requires t_T31 = 0 (set allow_t31 to override)"));
        }
        self.check_localization()
    }

    /// Gaps that keep one TQD electron in T3: `(T2 side, T1 side, Coulomb side)`.
    pub fn localization_gaps(&self) -> (f64, f64, f64) {
        let t = &self.tqd;
        let e2 = t.eps_t2 + t.v_t12 - t.v_t31;
        let e1 = t.eps_t1 + t.v_t12 - t.v_t23;
        let u_min = t.u_t1.min(t.u_t2).min(t.u_t3);
        (e2 - t.eps_t3, e1 - t.eps_t3, u_min - e1.max(e2))
    }

    pub fn check_localization(&self) -> Result<()> {
        let t = &self.tqd;
        let t_max = [t.t_t12.0.norm(), t.t_t23.0.norm(), t.t_t31.0.norm(), 1e-3].into_iter().fold(0.0, f64::max);
        let need = self.localization_margin * t_max;
        let (g2, g1, gu) = self.localization_gaps();
        for (label, gap) in [("eps_T2 + V_T12 - V_T31 - eps_T3", g2), ("eps_T1 + V_T12 - V_T23 - eps_T3", g1), ("min U - max eps", gu)] {
            if gap < need {
                return Err(SimError::LocalizationViolated(format!(
                    "{label} = {gap:.4} GHz is below {:.1} x max tunnel coupling ({t_max:.4} GHz)",
                    self.localization_margin
                )));
            }
        }
        Ok(())
    }

    /// Multiply every energy scale by `s`.
    pub fn scaled(&self, s: f64) -> DeviceParams {
        let mut p = self.clone();
        let sv = |v: &mut [f64; 3]| v.iter_mut().for_each(|x| *x *= s);
        p.omega_r *= s;
        p.g_d_ac *= s;
        p.g_t_ac *= s;
        p.dqd.eps_d1 *= s;
        p.dqd.eps_d2 *= s;
        p.dqd.t_d.0 *= s;
        sv(&mut p.dqd.b_d1);
        sv(&mut p.dqd.b_d2);
        let t = &mut p.tqd;
        for x in [
            &mut t.eps_t1,
            &mut t.eps_t2,
            &mut t.eps_t3,
            &mut t.u_t1,
            &mut t.u_t2,
            &mut t.u_t3,
            &mut t.v_t12,
            &mut t.v_t23,
            &mut t.v_t31,
        ] {
            *x *= s;
        }
        t.t_t12.0 *= s;
        t.t_t23.0 *= s;
        t.t_t31.0 *= s;
        sv(&mut t.b_t1);
        sv(&mut t.b_t2);
        sv(&mut t.b_t3);
        p
    }
}

/// Compact parameterisation: symmetric detunings, average field along z,
/// gradient along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSummary {
    pub omega_r: f64,
    pub omega_d_z: f64,
    pub omega_t_z: f64,
    pub omega_3_z: f64,
    pub g_d_x: f64,
    pub g_t_x: f64,
    pub t_d: f64,
    pub t_t12: f64,
    pub t_t23: f64,
    pub g_d_ac: f64,
    pub g_t_ac: f64,
    pub eps_d: f64,
    pub eps_t: f64,
    pub eps_t3: f64,
    pub u: f64,
    pub n_r: usize,
}

impl DeviceSummary {
    pub fn to_device(&self) -> DeviceParams {
        DeviceParams {
            omega_r: self.omega_r,
            dqd: DqdParams {
                eps_d1: 0.5 * self.eps_d,
                eps_d2: -0.5 * self.eps_d,
                t_d: Tunnel::real(self.t_d),
                b_d1: [2.0 * self.g_d_x, 0.0, self.omega_d_z],
                b_d2: [-2.0 * self.g_d_x, 0.0, self.omega_d_z],
            },
            tqd: TqdParams {
                eps_t1: 0.5 * self.eps_t,
                eps_t2: -0.5 * self.eps_t,
                eps_t3: self.eps_t3,
                u_t1: self.u,
                u_t2: self.u,
                u_t3: self.u,
                v_t12: 0.0,
                v_t23: 0.0,
                v_t31: 0.0,
                t_t12: Tunnel::real(self.t_t12),
                t_t23: Tunnel::real(self.t_t23),
                t_t31: Tunnel::default(),
                b_t1: [2.0 * self.g_t_x, 0.0, self.omega_t_z],
                b_t2: [-2.0 * self.g_t_x, 0.0, self.omega_t_z],
                b_t3: [0.0, 0.0, self.omega_3_z],
            },
            g_d_ac: self.g_d_ac,
            g_t_ac: self.g_t_ac,
            n_r: self.n_r,
            allow_t31: false,
            localization_margin: default_margin(),
        }
    }
}

/// Parameter sets of the reference experiments.
pub mod presets {
    use super::*;

    fn common() -> DeviceSummary {
        DeviceSummary {
            omega_r: 6.0,
            omega_d_z: 5.96,
            omega_t_z: 5.94,
            omega_3_z: 5.8,
            g_d_x: 0.2,
            g_t_x: 0.2,
            t_d: 3.5,
            t_t12: 3.5,
            t_t23: 0.0,
            g_d_ac: 0.05,
            g_t_ac: 0.05,
            eps_d: 0.0,
            eps_t: 0.0,
            eps_t3: -300.0,
            u: 2500.0,
            n_r: 3,
        }
    }

    /// Effective-model validation sweep: equal Zeeman splittings in D and T.
    pub fn model_validation(eps: f64, t_t23: f64) -> DeviceSummary {
        DeviceSummary {
            omega_d_z: 5.95,
            omega_t_z: 5.95,
            t_t23,
            g_d_ac: 0.04,
            g_t_ac: 0.04,
            eps_d: eps,
            eps_t: eps,
            ..common()
        }
    }

    /// Short-range CZ between T and 3, detuned modules; `t_T23` is pulsed.
    pub fn cz(eps: f64) -> DeviceSummary {
        DeviceSummary { eps_d: eps, eps_t: eps, ..common() }
    }

    /// Cross-resonance CNOT between D and T at the charge sweet spot.
    pub fn cnot(t_t23: f64) -> DeviceSummary {
        DeviceSummary { t_t23, ..common() }
    }
}

/// Microwave drive on the DQD detuning with a rectangular envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    #[serde(rename = "amplitude_GHz")]
    pub amplitude: f64,
    #[serde(rename = "frequency_GHz")]
    pub frequency: f64,
    #[serde(rename = "start_ns", default)]
    pub start: f64,
    #[serde(rename = "duration_ns")]
    pub duration: f64,
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        // a negative amplitude is a drive phase of π
        if !self.amplitude.is_finite() || !self.frequency.is_finite() || !self.start.is_finite() {
            return Err(SimError::param("drive", "non-finite value"));
        }
        if !(self.duration > 0.0) {
            return Err(SimError::param("drive.duration", "must be positive"));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_on(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }

    /// `Ω_D cos(2π f_d t)` inside the window, zero outside.
    pub fn coefficient(&self, t: f64) -> f64 {
        if self.is_on(t) {
            self.amplitude * (crate::units::TWO_PI * self.frequency * t).cos()
        } else {
            0.0
        }
    }
}

/// Piecewise-linear waveform through `(times[k], values[k])`; undefined
/// (returns `None`) outside `[times[0], times[last]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(SimError::param("waveform", "need at least two knots with matching lengths"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimError::param("waveform", "knot times must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SimError::param("waveform", "non-finite sample"));
        }
        Ok(Waveform { times, values })
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn sample(&self, t: f64) -> Option<f64> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k >= self.times.len() {
            return Some(*self.values.last().unwrap());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Device Hamiltonian split into a static part and two scalar-weighted terms.
#[derive(Debug, Clone)]
pub struct TimeDependentHamiltonian {
    pub h_static: CMat,
    /// `n_D1 - n_D2`.
    pub drive_op: CMat,
    pub drive: Option<DriveSpec>,
    /// `-(e^{iφ} Σ_σ c†_{T3σ} c_{T2σ} + h.c.)`, `φ = arg t_T23`.
    pub tunnel_op: CMat,
    /// Absolute `|t_T23(t)|`; outside its support the static value applies.
    pub tunnel: Option<Waveform>,
    pub t23_base: f64,
}

fn zeeman(ops: &OperatorSet, dot: Dot, b: [f64; 3]) -> CMat {
    let s = ops.s(dot);
    (&s[0] * C64::new(0.5 * b[0], 0.0)) + (&s[1] * C64::new(0.5 * b[1], 0.0)) + (&s[2] * C64::new(0.5 * b[2], 0.0))
}

fn hopping(ops: &OperatorSet, to: Dot, from: Dot, t: C64) -> CMat {
    // -(t c†_to c_from + h.c.)
    let h = ops.hop(to, from) * t;
    let hd = dagger(&h);
    -(h + hd)
}

/// Static part of the Hamiltonian (everything except the drive).
pub fn build_static(params: &DeviceParams, ops: &OperatorSet) -> Result<CMat> {
    params.validate()?;
    if params.n_r != ops.n_r {
        return Err(SimError::param("n_r", "device truncation differs from the operator set"));
    }
    let d = &params.dqd;
    let t = &params.tqd;
    let r = |x: f64| C64::new(x, 0.0);
    let id = ops.identity();
    let mut h = ops.photon_number() * r(params.omega_r);

    h = h + ops.n(Dot::D1) * r(d.eps_d1) + ops.n(Dot::D2) * r(d.eps_d2);
    h = h + zeeman(ops, Dot::D1, d.b_d1) + zeeman(ops, Dot::D2, d.b_d2);
    h = h + hopping(ops, Dot::D2, Dot::D1, d.t_d.0);

    for (dot, eps, u, b) in [
        (Dot::T1, t.eps_t1, t.u_t1, t.b_t1),
        (Dot::T2, t.eps_t2, t.u_t2, t.b_t2),
        (Dot::T3, t.eps_t3, t.u_t3, t.b_t3),
    ] {
        let n = ops.n(dot);
        h = h + n * r(eps) + n.dot(&(n - &id)) * r(0.5 * u) + zeeman(ops, dot, b);
    }
    h = h + ops.n(Dot::T1).dot(ops.n(Dot::T2)) * r(t.v_t12);
    h = h + ops.n(Dot::T2).dot(ops.n(Dot::T3)) * r(t.v_t23);
    h = h + ops.n(Dot::T3).dot(ops.n(Dot::T1)) * r(t.v_t31);
    h = h + hopping(ops, Dot::T2, Dot::T1, t.t_t12.0);
    h = h + hopping(ops, Dot::T3, Dot::T2, t.t_t23.0);
    h = h + hopping(ops, Dot::T1, Dot::T3, t.t_t31.0);

    let x = &ops.a + &ops.a_dag;
    h = h + x.dot(ops.n(Dot::D1)) * r(2.0 * params.g_d_ac);
    h = h + x.dot(ops.n(Dot::T1)) * r(2.0 * params.g_t_ac);

    let scale = h.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    if !is_hermitian(&h, 1e-12 * scale) {
        return Err(SimError::Numerical("assembled Hamiltonian is not Hermitian".into()));
    }
    Ok(h)
}

impl TimeDependentHamiltonian {
    pub fn new(
        params: &DeviceParams,
        ops: &OperatorSet,
        drive: Option<DriveSpec>,
        tunnel: Option<Waveform>,
    ) -> Result<Self> {
        let h_static = build_static(params, ops)?;
        if let Some(dr) = &drive {
            dr.validate()?;
        }
        let base = params.tqd.t_t23.0;
        let phase = if base == ZERO { C64::new(1.0, 0.0) } else { base / base.norm() };
        let tunnel_op = hopping(ops, Dot::T3, Dot::T2, phase);
        if let Some(w) = &tunnel {
            // signed values are allowed: filtered pulses undershoot, which flips the hopping sign
            let mut probe = params.clone();
            probe.tqd.t_t23 = Tunnel(phase * w.max_abs().max(base.norm()));
            probe.check_localization()?;
        }
        Ok(TimeDependentHamiltonian {
            h_static,
            drive_op: ops.n(Dot::D1) - ops.n(Dot::D2),
            drive,
            tunnel_op,
            tunnel,
            t23_base: base.norm(),
        })
    }

    /// Scalar weights `(drive, tunnel)` multiplying `drive_op` and `tunnel_op`.
    pub fn coefficients_at(&self, t: f64) -> Result<(f64, f64)> {
        if !t.is_finite() {
            return Err(SimError::WaveformUndefined(t));
        }
        let c_drive = self.drive.as_ref().map_or(0.0, |d| d.coefficient(t));
        let c_tunnel = match &self.tunnel {
            Some(w) => w.sample(t).map_or(0.0, |v| v - self.t23_base),
            None => 0.0,
        };
        Ok((c_drive, c_tunnel))
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<CMat> {
        let (cd, ct) = self.coefficients_at(t)?;
        let mut h = self.h_static.clone();
        if cd != 0.0 {
            h.scaled_add(C64::new(cd, 0.0), &self.drive_op);
        }
        if ct != 0.0 {
            h.scaled_add(C64::new(ct, 0.0), &self.tunnel_op);
        }
        Ok(h)
    }

    /// Times at which the coefficients may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::new();
        if let Some(d) = &self.drive {
            b.push(d.start);
            b.push(d.end());
        }
        if let Some(w) = &self.tunnel {
            b.push(w.start());
            b.push(w.end());
        }
        b
    }

    /// Largest frequency scale entering the dynamics (GHz), used for step-size
    /// checks.
    pub fn max_frequency(&self, params: &DeviceParams) -> f64 {
        let norm = |b: [f64; 3]| (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let fields = [params.dqd.b_d1, params.dqd.b_d2, params.tqd.b_t1, params.tqd.b_t2, params.tqd.b_t3];
        let mut f = params.omega_r;
        for b in fields {
            f = f.max(norm(b));
        }
        if let Some(d) = &self.drive {
            f = f.max(d.frequency.abs());
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, build_operators};
    use crate::linalg::{eigh, max_abs_diff};
    use rand::{Rng, SeedableRng};

    fn ops(n_r: usize) -> OperatorSet {
        build_operators(&build_basis(n_r).unwrap())
    }

    fn bare(n_r: usize) -> DeviceParams {
        let mut p = presets::cnot(0.0).to_device();
        p.n_r = n_r;
        p
    }

    #[test]
    fn uncoupled_device_is_diagonal() {
        let mut p = bare(2);
        p.dqd.t_d = Tunnel::default();
        p.tqd.t_t12 = Tunnel::default();
        p.dqd.b_d1 = [0.0; 3];
        p.dqd.b_d2 = [0.0; 3];
        p.tqd.b_t1 = [0.0; 3];
        p.tqd.b_t2 = [0.0; 3];
        p.tqd.b_t3 = [0.0; 3];
        p.g_d_ac = 0.0;
        p.g_t_ac = 0.0;
        p.dqd.eps_d1 = 1.0;
        p.dqd.eps_d2 = 1.0;
        let o = ops(2);
        let h = build_static(&p, &o).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i != j {
                    assert_eq!(h[[i, j]], ZERO);
                }
            }
        }
        // ground configuration: one DQD electron (1 GHz) + T3 + one of T1/T2 (0 GHz)
        let e = eigh(&h).unwrap();
        assert!((e.values[0] - (1.0 + (-300.0) + 0.0)).abs() < 1e-9);
    }

    #[test]
    fn dqd_orbital_splitting() {
        // isolated DQD at B = 0: splitting sqrt(eps² + 4 |t|²)
        let (eps, td) = (2.3, 3.5);
        let mut p = bare(1);
        p.dqd.eps_d1 = eps / 2.0;
        p.dqd.eps_d2 = -eps / 2.0;
        p.dqd.b_d1 = [0.0; 3];
        p.dqd.b_d2 = [0.0; 3];
        p.dqd.t_d = Tunnel(C64::from_polar(td, 0.7));
        p.g_d_ac = 0.0;
        p.g_t_ac = 0.0;
        let o = ops(1);
        let h = build_static(&p, &o).unwrap();
        // restrict to DQD orbital states with the TQD frozen in one configuration
        let basis = build_basis(1).unwrap();
        let idx: Vec<usize> = (0..4).map(|d| basis.index(d, 0, 0)).collect();
        let mut sub = CMat::zeros((4, 4));
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                sub[[a, b]] = h[[i, j]];
            }
        }
        let e = eigh(&sub).unwrap();
        let split = e.values[3] - e.values[0];
        assert!((split - (eps * eps + 4.0 * td * td).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn device_json_roundtrip() {
        let mut p = bare(3);
        p.tqd.t_t12 = Tunnel(C64::new(3.0, 0.5));
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("omega_r_GHz"));
        let q: DeviceParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = s.replace("omega_r_GHz", "omega_r");
        assert!(serde_json::from_str::<DeviceParams>(&bad).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut p = bare(3);
        p.tqd.t_t31 = Tunnel::real(0.1);
        assert!(matches!(p.validate(), Err(SimError::InvalidParameter { .. })));
        p.allow_t31 = true;
        assert!(p.validate().is_ok());
        let mut p = bare(3);
        p.tqd.v_t12 = -1.0;
        assert!(p.validate().is_err());
        let mut p = bare(3);
        p.tqd.eps_t3 = -5.0;
        assert!(matches!(p.validate(), Err(SimError::LocalizationViolated(_))));
        let mut p = bare(3);
        p.n_r = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn charge_conservation_and_photon_blocks() {
        let o = ops(3);
        let mut p = bare(3);
        p.tqd.t_t23 = Tunnel::real(0.8);
        let h = build_static(&p, &o).unwrap();
        let nd = o.n(Dot::D1) + o.n(Dot::D2);
        let nt = o.n(Dot::T1) + o.n(Dot::T2) + o.n(Dot::T3);
        for n in [nd, nt] {
            let c = h.dot(&n) - n.dot(&h);
            assert!(c.iter().all(|z| z.norm() < 1e-12));
        }
        p.g_d_ac = 0.0;
        p.g_t_ac = 0.0;
        let h = build_static(&p, &o).unwrap();
        let nph = o.photon_number();
        let c = h.dot(&nph) - nph.dot(&h);
        assert!(c.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn energy_scaling() {
        let o = ops(2);
        let mut p = bare(2);
        p.tqd.t_t23 = Tunnel::real(0.45);
        let e1 = eigh(&build_static(&p, &o).unwrap()).unwrap().values;
        let e2 = eigh(&build_static(&p.scaled(1.7), &o).unwrap()).unwrap().values;
        for (a, b) in e1.iter().zip(&e2) {
            assert!((1.7 * a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn time_dependent_terms() {
        let o = ops(2);
        let p = bare(2);
        let drive = DriveSpec { amplitude: 0.1, frequency: 5.9, start: 0.0, duration: 10.0 };
        let w = Waveform::new(vec![20.0, 30.0], vec![1.0, 1.0]).unwrap();
        let h = TimeDependentHamiltonian::new(&p, &o, Some(drive), Some(w)).unwrap();
        assert_eq!(h.hamiltonian_at(15.0).unwrap(), h.h_static);
        assert_eq!(h.coefficients_at(0.0).unwrap().0, 0.1);
        assert_eq!(h.coefficients_at(25.0).unwrap(), (0.0, 1.0));
        assert!(h.coefficients_at(f64::NAN).is_err());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = rng.random::<f64>() * 40.0;
            let m = h.hamiltonian_at(t).unwrap();
            let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            assert!(max_abs_diff(&m, &dagger(&m)) < 1e-12 * scale);
        }
    }

    #[test]
    fn waveform_interpolates() {
        let w = Waveform::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(w.sample(0.5), Some(1.0));
        assert_eq!(w.sample(2.0), Some(1.0));
        assert_eq!(w.sample(3.0), Some(0.0));
        assert_eq!(w.sample(3.5), None);
        assert!(Waveform::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
