//! End-to-end gate simulations: the pulsed-exchange CZ between T and 3, and
//! the cross-resonance CNOT between D and T.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, build_operators, BasisIndex, Dot, OperatorSet};
use crate::effective::{analyze, dressed_projector, pauli_decompose, pauli_index, spin_charge_mixing, DressedProjector};
use crate::error::{Result, SimError};
use crate::hamiltonian::{build_static, DeviceParams, DriveSpec, TimeDependentHamiltonian};
use crate::linalg::{dagger, expm_minus_i, kron_all, paulis, CMat};
use crate::metrics::{gates as targets, optimize_local, FidelityReport, Gauge};
use crate::propagator::{propagate, EvolutionTrace, PropagationOptions};
use crate::pulse::{build_control, ControlWaveform, ExchangeMap, ExchangeSource, PulseSpec, Shape};
use crate::units::TWO_PI;

/// Basis and operators for one resonator truncation.
pub struct Model {
    pub basis: BasisIndex,
    pub ops: OperatorSet,
}

impl Model {
    pub fn new(n_r: usize) -> Result<Self> {
        let basis = build_basis(n_r)?;
        let ops = build_operators(&basis);
        Ok(Model { basis, ops })
    }

    pub fn n_r(&self) -> usize {
        self.basis.n_r
    }

    fn check(&self, params: &DeviceParams) -> Result<()> {
        if params.n_r != self.n_r() {
            return Err(SimError::param("n_r", format!("model built for n_r = {}, device has {}", self.n_r(), params.n_r)));
        }
        params.validate()
    }
}

pub const DEFAULT_DT: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Cz,
    Cnot,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TracePoint {
    #[serde(rename = "t_ns")]
    pub t: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub unitarity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateResult {
    pub protocol: Protocol,
    pub target: String,
    pub label: String,
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
    /// End of the control signal (ns).
    #[serde(rename = "control_end_ns")]
    pub control_end: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
    /// Largest infidelity at or after `control_end`.
    pub max_infidelity_after_pulse: f64,
    pub min_unitarity: f64,
    pub max_fidelity: f64,
    #[serde(rename = "t_at_max_fidelity_ns")]
    pub t_at_max_fidelity: f64,
    pub gram_error: f64,
    pub steps: usize,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
}

impl GateResult {
    /// Copy without the time trace.
    pub fn summary(&self) -> GateResult {
        GateResult { trace: Vec::new(), ..self.clone() }
    }

    fn summarize(
        protocol: Protocol,
        target: &str,
        label: String,
        t_g: f64,
        control_end: f64,
        reports: &[FidelityReport],
        tr: &EvolutionTrace,
        warnings: Vec<String>,
    ) -> Self {
        let trace: Vec<TracePoint> = reports
            .iter()
            .map(|r| TracePoint { t: r.time, fidelity: r.average_gate_fidelity, infidelity: 1.0 - r.average_gate_fidelity, unitarity: r.unitarity })
            .collect();
        let after = trace.iter().filter(|p| p.t >= control_end - 1e-9);
        let max_inf = after.map(|p| p.infidelity).fold(f64::NAN, f64::max);
        let best = trace.iter().fold(None::<&TracePoint>, |b, p| if b.is_none_or(|b| p.fidelity > b.fidelity) { Some(p) } else { b });
        GateResult {
            protocol,
            target: target.into(),
            label,
            t_g,
            control_end,
            min_unitarity: trace.iter().map(|p| p.unitarity).fold(f64::INFINITY, f64::min),
            max_fidelity: best.map_or(f64::NAN, |p| p.fidelity),
            t_at_max_fidelity: best.map_or(f64::NAN, |p| p.t),
            max_infidelity_after_pulse: max_inf,
            trace,
            gram_error: tr.gram_error,
            steps: tr.steps,
            wall_seconds: tr.wall_seconds,
            warnings,
        }
    }
}

/// Single-qubit Pauli coefficients and the XX coupling read off `P† A P`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProjectedCouplings {
    pub omega_d: f64,
    pub omega_t: f64,
    pub omega_3: f64,
    /// `H ⊃ −J_r σ_D^x σ_T^x`.
    pub j_r: f64,
    /// `P† (n_D1 − n_D2) P ⊃ c σ_D^x`.
    pub drive_x: f64,
}

pub fn projected_couplings(params: &DeviceParams, model: &Model, proj: &DressedProjector) -> Result<ProjectedCouplings> {
    let h = pauli_decompose(&proj.project(&build_static(params, &model.ops)?));
    let d = pauli_decompose(&proj.project(&(model.ops.n(Dot::D1) - model.ops.n(Dot::D2))));
    Ok(ProjectedCouplings {
        omega_d: 2.0 * h[pauli_index(3, 0, 0)].re,
        omega_t: 2.0 * h[pauli_index(0, 3, 0)].re,
        omega_3: 2.0 * h[pauli_index(0, 0, 3)].re,
        j_r: -h[pauli_index(1, 1, 0)].re,
        drive_x: d[pauli_index(1, 0, 0)].re,
    })
}

fn uniform_samples(t_end: f64, interval: f64, extra: &[f64]) -> Vec<f64> {
    let n = (t_end / interval).round().max(1.0) as usize;
    let mut v: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    v.extend(extra.iter().copied().filter(|&t| (0.0..=t_end).contains(&t)));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzSettings {
    #[serde(default = "default_cz_pulse")]
    pub pulse: PulseSpec,
    /// Observation past the control end, as a fraction of `t_g`.
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    #[serde(rename = "sample_interval_ns", default = "default_cz_interval")]
    pub sample_interval: f64,
    #[serde(rename = "dt_ns", default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gauge: Gauge,
    #[serde(default = "default_map_grid")]
    pub map_grid: usize,
    #[serde(default = "default_exchange_source")]
    pub exchange_source: ExchangeSource,
}

fn default_cz_pulse() -> PulseSpec {
    PulseSpec::new(Shape::Hann, 100.0)
}
fn default_window() -> f64 {
    0.5
}
fn default_cz_interval() -> f64 {
    0.25
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_map_grid() -> usize {
    200
}
fn default_exchange_source() -> ExchangeSource {
    ExchangeSource::Effective
}

impl CzSettings {
    pub fn new(pulse: PulseSpec) -> Self {
        CzSettings {
            pulse,
            window_fraction: default_window(),
            sample_interval: default_cz_interval(),
            dt: default_dt(),
            gauge: Gauge::ZOnly,
            map_grid: default_map_grid(),
            exchange_source: default_exchange_source(),
        }
    }
}

impl Default for CzSettings {
    fn default() -> Self {
        CzSettings::new(default_cz_pulse())
    }
}

/// Largest `J_e / Δω` considered inside the adiabatic-CZ regime.
pub const CZ_REGIME_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzRun {
    pub result: GateResult,
    pub control: ControlWaveform,
    #[serde(rename = "delta_omega_GHz")]
    pub delta_omega: f64,
}

pub fn run_cz(params: &DeviceParams, settings: &CzSettings, model: &Model) -> Result<CzRun> {
    model.check(params)?;
    if params.tqd.t_t23.0.norm() != 0.0 {
        return Err(SimError::param("t_T23", "the CZ pulse starts from t_T23 = 0"));
    }
    let mut warnings = Vec::new();
    let (_, _, eff) = analyze(params, None)?;
    let delta = eff.omega_t - eff.omega_3;
    let map = ExchangeMap::with_source(params, settings.map_grid, settings.exchange_source)?;
    let control = build_control(&settings.pulse, &map)?;
    let j_peak = control.j_e.iter().fold(0.0f64, |m, v| m.max(*v));
    if j_peak / delta.abs() > CZ_REGIME_LIMIT {
        let w = format!("peak J_e / Δω = {:.3} exceeds {CZ_REGIME_LIMIT}", j_peak / delta.abs());
        log::warn!("{w}");
        warnings.push(w);
    }
    let proj = dressed_projector(params, &model.basis, &model.ops)?;
    let h = TimeDependentHamiltonian::new(params, &model.ops, None, Some(control.waveform()?))?;
    let t_obs = control.end + settings.window_fraction * settings.pulse.t_g;
    let times = uniform_samples(t_obs, settings.sample_interval, &[settings.pulse.t_g, control.end]);
    let opts = PropagationOptions { dt: settings.dt, sample_times: times, keep_full: false, max_frequency: h.max_frequency(params) };
    let tr = propagate(&h, &proj.iso, &opts)?;
    let goal = targets::cz_t3();
    let reports = tr
        .u_proj
        .iter()
        .zip(&tr.times)
        .map(|(u, &t)| optimize_local(u, &goal, settings.gauge, t))
        .collect::<Result<Vec<_>>>()?;
    let label = format!("{:?}", settings.pulse.shape).to_lowercase() + if settings.pulse.filter.is_some() { "-filtered" } else { "" };
    let result = GateResult::summarize(Protocol::Cz, "CZ_T3 x I_D", label, settings.pulse.t_g, control.end, &reports, &tr, warnings);
    Ok(CzRun { result, control, delta_omega: delta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnotSettings {
    /// Target effective drive `Ω_eff^x` (GHz).
    #[serde(rename = "omega_eff_x_GHz", default = "default_omega_eff")]
    pub omega_eff_x: f64,
    /// Drive frequency; defaults to the dressed T transition.
    #[serde(rename = "drive_frequency_GHz", default, skip_serializing_if = "Option::is_none")]
    pub drive_frequency: Option<f64>,
    /// Observation window; defaults to `(1 + window_fraction)` times the
    /// predicted gate time.
    #[serde(rename = "t_obs_ns", default, skip_serializing_if = "Option::is_none")]
    pub t_obs: Option<f64>,
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    /// Coarse sampling stride in drive periods. Above 1, every period around
    /// the best coarse local maxima is evaluated as well. The fidelity carries
    /// a fast component of a few drive periods, so a coarse stride can alias
    /// it and settle on a neighbouring, slightly lower peak.
    #[serde(default = "default_period_stride")]
    pub sample_every_periods: usize,
    #[serde(rename = "dt_ns", default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gauge: Gauge,
}

fn default_omega_eff() -> f64 {
    0.02
}
fn default_period_stride() -> usize {
    1
}

impl Default for CnotSettings {
    fn default() -> Self {
        CnotSettings {
            omega_eff_x: default_omega_eff(),
            drive_frequency: None,
            t_obs: None,
            window_fraction: default_window(),
            sample_every_periods: default_period_stride(),
            dt: default_dt(),
            gauge: Gauge::ZOnly,
        }
    }
}

/// Frame and rate quantities of the cross-resonance scheme.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossResonance {
    /// Bare drive amplitude on `n_D1 − n_D2` (GHz).
    #[serde(rename = "omega_D_GHz")]
    pub omega_drive: f64,
    #[serde(rename = "omega_eff_x_GHz")]
    pub omega_eff: f64,
    #[serde(rename = "drive_frequency_GHz")]
    pub omega_d: f64,
    #[serde(rename = "delta_D_GHz")]
    pub delta_d: f64,
    #[serde(rename = "delta_T_GHz")]
    pub delta_t: f64,
    pub chi: f64,
    #[serde(rename = "eta_GHz")]
    pub eta: f64,
    #[serde(rename = "J_r_GHz")]
    pub j_r: f64,
    #[serde(rename = "J_zx_GHz")]
    pub j_zx: f64,
    #[serde(rename = "t_g_predicted_ns")]
    pub t_g_predicted: f64,
}

/// Calibrate the drive so that `Ω_eff^x` hits the target through the
/// effective model, and collect the frame parameters.
pub fn cross_resonance(params: &DeviceParams, settings: &CnotSettings, couplings: &ProjectedCouplings) -> Result<CrossResonance> {
    let (_, ang, _) = analyze(params, None)?;
    let mix = spin_charge_mixing(&ang.d);
    if mix.abs() < 1e-9 {
        return Err(SimError::param("drive", "no spin-charge mixing in the DQD; the drive cannot address qubit D"));
    }
    let omega_drive = settings.omega_eff_x / mix;
    let omega_d = settings.drive_frequency.unwrap_or(couplings.omega_t);
    let delta_d = couplings.omega_d - omega_d;
    let delta_t = couplings.omega_t - omega_d;
    let omega_eff = settings.omega_eff_x;
    let eta = delta_d.hypot(omega_eff);
    let chi = omega_eff.atan2(delta_d);
    let j_zx = couplings.j_r * omega_eff / eta;
    Ok(CrossResonance {
        omega_drive,
        omega_eff,
        omega_d,
        delta_d,
        delta_t,
        chi,
        eta,
        j_r: couplings.j_r,
        j_zx,
        t_g_predicted: 1.0 / (4.0 * j_zx.abs()),
    })
}

fn op3(which: usize, p: &CMat) -> CMat {
    let id = &paulis()[0];
    let mut f = [id, id, id];
    f[which] = p;
    kron_all(&f)
}

/// Maps a lab-frame projected evolution to the frame where the ideal
/// evolution is `exp(iπ J̃ t σ_D^z σ_T^x)`, then applies the local
/// operations that turn it into a CNOT.
pub struct CnotFrame {
    u2: CMat,
    u_local: CMat,
    cr: CrossResonance,
}

impl CnotFrame {
    pub fn new(cr: CrossResonance) -> Result<Self> {
        let [_, x, y, z] = paulis();
        let r = |v: f64| C64::new(v, 0.0);
        let u2 = expm_minus_i(&(op3(0, &y) * r(0.5 * cr.chi)))?;
        let u_local = expm_minus_i(&(op3(1, &x) * r(PI / 4.0)))?.dot(&expm_minus_i(&(op3(0, &z) * r(PI / 4.0)))?).mapv(|v| v * C64::from_polar(1.0, PI / 4.0));
        Ok(CnotFrame { u2, u_local, cr })
    }

    fn z_frame(w_d: f64, w_t: f64, t: f64) -> CMat {
        // exp(-i 2π t (w_d Z_D + w_t Z_T)/2), diagonal
        CMat::from_shape_fn((8, 8), |(i, j)| {
            if i != j {
                return C64::new(0.0, 0.0);
            }
            let zd = if (i >> 2) & 1 == 0 { 1.0 } else { -1.0 };
            let zt = if (i >> 1) & 1 == 0 { 1.0 } else { -1.0 };
            C64::from_polar(1.0, -0.5 * TWO_PI * t * (w_d * zd + w_t * zt))
        })
    }

    /// `U_local U3(t)† U2† U1(t)† U U2`.
    pub fn transform(&self, u: &CMat, t: f64) -> CMat {
        let u1 = Self::z_frame(self.cr.omega_d, self.cr.omega_d, t);
        let u3 = Self::z_frame(self.cr.eta, self.cr.delta_t, t);
        let qf = dagger(&u3).dot(&dagger(&self.u2)).dot(&dagger(&u1)).dot(u).dot(&self.u2);
        self.u_local.dot(&qf)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnotRun {
    pub result: GateResult,
    pub cross_resonance: CrossResonance,
    pub couplings: ProjectedCouplings,
}

pub fn run_cnot(params: &DeviceParams, settings: &CnotSettings, model: &Model) -> Result<CnotRun> {
    model.check(params)?;
    let proj = dressed_projector(params, &model.basis, &model.ops)?;
    let couplings = projected_couplings(params, model, &proj)?;
    let cr = cross_resonance(params, settings, &couplings)?;
    run_cnot_with(params, settings, model, &proj, cr, couplings)
}

/// CNOT run with an externally fixed calibration and projector, e.g. a noisy
/// device operated with the nominal drive and frames.
/// Coarse local maxima refined to single-period resolution.
const REFINED_PEAKS: usize = 3;

pub fn run_cnot_with(
    params: &DeviceParams,
    settings: &CnotSettings,
    model: &Model,
    proj: &DressedProjector,
    cr: CrossResonance,
    couplings: ProjectedCouplings,
) -> Result<CnotRun> {
    let mut warnings = Vec::new();
    if params.dqd.eps_d1 != params.dqd.eps_d2 || params.tqd.eps_t1 != params.tqd.eps_t2 {
        warnings.push("operating away from the charge sweet spot".to_string());
    }
    if settings.drive_frequency.is_some_and(|f| (f - couplings.omega_t).abs() > 1e-4) {
        let w = format!("drive detuned from the T transition by {:.3e} GHz", cr.delta_t);
        log::warn!("{w}");
        warnings.push(w);
    }
    let t_obs = settings.t_obs.unwrap_or((1.0 + settings.window_fraction) * cr.t_g_predicted);
    let period = 1.0 / cr.omega_d;
    let n_periods = (t_obs / period).floor() as usize;
    let stride = settings.sample_every_periods.max(1);
    let coarse: Vec<usize> = (0..=n_periods / stride).map(|k| k * stride).collect();
    let drive = DriveSpec { amplitude: cr.omega_drive, frequency: cr.omega_d, start: 0.0, duration: t_obs + period };
    let h = TimeDependentHamiltonian::new(params, &model.ops, Some(drive), None)?;
    let frame = CnotFrame::new(cr)?;
    let goal = targets::cnot_dt();
    let evaluate = |periods: &[usize]| -> Result<(EvolutionTrace, Vec<FidelityReport>)> {
        let opts = PropagationOptions {
            dt: settings.dt,
            sample_times: periods.iter().map(|&k| k as f64 * period).collect(),
            keep_full: false,
            max_frequency: h.max_frequency(params),
        };
        let tr = propagate(&h, &proj.iso, &opts)?;
        let reports = tr
            .u_proj
            .iter()
            .zip(&tr.times)
            .map(|(u, &t)| optimize_local(&frame.transform(u, t), &goal, settings.gauge, t))
            .collect::<Result<Vec<_>>>()?;
        Ok((tr, reports))
    };
    let (mut tr, mut reports) = evaluate(&coarse)?;
    if stride > 1 {
        // The plateau can hold several near-equal peaks, so refine every
        // period around the best few coarse local maxima.
        let f: Vec<f64> = reports.iter().map(|r| r.average_gate_fidelity).collect();
        let mut peaks: Vec<usize> = (0..f.len())
            .filter(|&i| (i == 0 || f[i] >= f[i - 1]) && (i + 1 == f.len() || f[i] >= f[i + 1]))
            .collect();
        peaks.sort_by(|&a, &b| f[b].total_cmp(&f[a]));
        let mut fine: Vec<usize> = peaks
            .iter()
            .take(REFINED_PEAKS)
            .flat_map(|&i| {
                let kb = coarse[i];
                kb.saturating_sub(stride - 1)..=(kb + stride - 1).min(n_periods)
            })
            .filter(|k| k % stride != 0)
            .collect();
        log::debug!("refining around {:?}", peaks.iter().take(REFINED_PEAKS).map(|&i| (coarse[i], f[i])).collect::<Vec<_>>());
        fine.sort_unstable();
        fine.dedup();
        if !fine.is_empty() {
            let (tr_f, rep_f) = evaluate(&fine)?;
            tr.gram_error = tr.gram_error.max(tr_f.gram_error);
            tr.steps += tr_f.steps;
            tr.wall_seconds += tr_f.wall_seconds;
            let mut merged: Vec<(f64, CMat, FidelityReport)> =
                tr.times.drain(..).zip(tr.u_proj.drain(..)).zip(reports).map(|((t, u), r)| (t, u, r)).collect();
            merged.extend(tr_f.times.into_iter().zip(tr_f.u_proj).zip(rep_f).map(|((t, u), r)| (t, u, r)));
            merged.sort_by(|a, b| a.0.total_cmp(&b.0));
            reports = Vec::with_capacity(merged.len());
            for (t, u, r) in merged {
                tr.times.push(t);
                tr.u_proj.push(u);
                reports.push(r);
            }
        }
    }
    let label = format!("t23={:.3}", params.tqd.t_t23.0.norm());
    let mut result = GateResult::summarize(Protocol::Cnot, "CNOT_TD x I_3", label, cr.t_g_predicted, 0.0, &reports, &tr, warnings);
    result.t_g = result.t_at_max_fidelity;
    Ok(CnotRun { result, cross_resonance: cr, couplings })
}

/// Fidelity of a single CNOT run at a fixed gate time.
pub fn cnot_fidelity_at(
    params: &DeviceParams,
    settings: &CnotSettings,
    model: &Model,
    proj: &DressedProjector,
    cr: CrossResonance,
    t_g: f64,
) -> Result<FidelityReport> {
    let period = 1.0 / cr.omega_d;
    let t = (t_g / period).round() * period;
    let drive = DriveSpec { amplitude: cr.omega_drive, frequency: cr.omega_d, start: 0.0, duration: t + period };
    let h = TimeDependentHamiltonian::new(params, &model.ops, Some(drive), None)?;
    let opts = PropagationOptions { dt: settings.dt, sample_times: vec![t], keep_full: false, max_frequency: h.max_frequency(params) };
    let tr = propagate(&h, &proj.iso, &opts)?;
    let frame = CnotFrame::new(cr)?;
    optimize_local(&frame.transform(&tr.u_proj[0], t), &targets::cnot_dt(), settings.gauge, t)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RobustnessPoint {
    #[serde(rename = "drive_frequency_GHz")]
    pub omega_d: f64,
    #[serde(rename = "detuning_MHz")]
    pub detuning_mhz: f64,
    pub max_fidelity: f64,
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
}

/// Best fidelity over gate duration for each drive frequency.
pub fn drive_frequency_robustness(params: &DeviceParams, settings: &CnotSettings, model: &Model, omega_grid: &[f64]) -> Result<Vec<RobustnessPoint>> {
    robustness(params, settings, model, |_| omega_grid.to_vec())
}

/// As [`drive_frequency_robustness`], with the grid given as detunings (MHz)
/// from the dressed T frequency.
pub fn drive_detuning_robustness(params: &DeviceParams, settings: &CnotSettings, model: &Model, detunings_mhz: &[f64]) -> Result<Vec<RobustnessPoint>> {
    robustness(params, settings, model, |w_t| detunings_mhz.iter().map(|d| w_t + 1e-3 * d).collect())
}

fn robustness(params: &DeviceParams, settings: &CnotSettings, model: &Model, grid: impl Fn(f64) -> Vec<f64>) -> Result<Vec<RobustnessPoint>> {
    use rayon::prelude::*;
    model.check(params)?;
    let proj = dressed_projector(params, &model.basis, &model.ops)?;
    let couplings = projected_couplings(params, model, &proj)?;
    let nominal = cross_resonance(params, settings, &couplings)?;
    let t_obs = settings.t_obs.unwrap_or((1.0 + settings.window_fraction) * nominal.t_g_predicted);
    grid(couplings.omega_t)
        .par_iter()
        .map(|&w| {
            let s = CnotSettings { drive_frequency: Some(w), t_obs: Some(t_obs), ..settings.clone() };
            let cr = cross_resonance(params, &s, &couplings)?;
            let run = run_cnot_with(params, &s, model, &proj, cr, couplings)?;
            Ok(RobustnessPoint {
                omega_d: w,
                detuning_mhz: 1e3 * (w - couplings.omega_t),
                max_fidelity: run.result.max_fidelity,
                t_g: run.result.t_at_max_fidelity,
            })
        })
        .collect()
}

/// Leading-order Heisenberg exchange `4 U t_c² / (U² − ε²)` (GHz).
pub fn residual_exchange(t_c: f64, u: f64, eps: f64) -> Result<f64> {
    if !(u > 0.0) || eps.abs() >= u {
        return Err(SimError::param("residual_exchange", "requires |ε| < U"));
    }
    Ok(4.0 * u * t_c * t_c / (u * u - eps * eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, max_abs_diff};

    #[test]
    fn residual_exchange_values() {
        assert!((residual_exchange(0.45, 2500.0, 300.0).unwrap() * 1e6 - 328.7).abs() < 0.05);
        assert!((residual_exchange(0.8, 2500.0, 300.0).unwrap() * 1e3 - 1.039).abs() < 5e-4);
        assert_eq!(residual_exchange(0.0, 2500.0, 300.0).unwrap(), 0.0);
        assert!(residual_exchange(0.1, 2500.0, 2500.0).is_err());
    }

    /// Singlet sector of the two-site Hubbard model: `|S(1,1)⟩` coupled with
    /// `√2 t` to the doubly occupied states at `U ± ε`; triplets stay at 0.
    fn hubbard_exchange(t: f64, u: f64, eps: f64) -> f64 {
        let s2t = C64::new(2f64.sqrt() * t, 0.0);
        let mut h = CMat::zeros((3, 3));
        h[[1, 1]] = C64::new(u + eps, 0.0);
        h[[2, 2]] = C64::new(u - eps, 0.0);
        h[[0, 1]] = s2t;
        h[[1, 0]] = s2t;
        h[[0, 2]] = s2t;
        h[[2, 0]] = s2t;
        -eigh(&h).unwrap().values[0]
    }

    #[test]
    fn residual_exchange_matches_hubbard() {
        for t in [0.45, 0.8] {
            let exact = hubbard_exchange(t, 2500.0, 300.0);
            let approx = residual_exchange(t, 2500.0, 300.0).unwrap();
            assert!((approx / exact - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn cnot_frame_maps_ideal_evolution() {
        // ideal effective cross-resonance evolution in the lab frame
        let cr = CrossResonance {
            omega_drive: 0.0,
            omega_eff: 0.02,
            omega_d: 5.9,
            delta_d: 0.019,
            delta_t: 0.0,
            chi: 0.02f64.atan2(0.019),
            eta: 0.019f64.hypot(0.02),
            j_r: 0.0,
            j_zx: 0.001,
            t_g_predicted: 250.0,
        };
        let [_, x, _, z] = paulis();
        let r = |v: f64| C64::new(v, 0.0);
        let t = 250.0;
        let qf = expm_minus_i(&(op3(0, &z).dot(&op3(1, &x)) * r(-PI * cr.j_zx * t))).unwrap();
        let frame = CnotFrame::new(cr).unwrap();
        let u1 = CnotFrame::z_frame(cr.omega_d, cr.omega_d, t);
        let u3 = CnotFrame::z_frame(cr.eta, cr.delta_t, t);
        let lab = u1.dot(&frame.u2).dot(&u3).dot(&qf).dot(&dagger(&frame.u2));
        assert!(max_abs_diff(&frame.transform(&lab, t), &targets::cnot_dt()) < 1e-10);
    }
}
