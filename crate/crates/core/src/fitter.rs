//! Numerical fit of the effective-model parameters to the projected dynamics
//! of the full static Hamiltonian.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::{analyze, build_effective_hamiltonian, dressed_projector, EffectiveParams};
use crate::error::{Result, SimError};
use crate::gates::Model;
use crate::hamiltonian::{presets, DeviceParams};
use crate::linalg::{dagger, eigh, CMat};
use crate::optimize::{minimize_restarting, SimplexOptions};
use crate::propagator::propagate_static;
use crate::units::TWO_PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// Total fitting window (ns).
    #[serde(rename = "t0_ns", default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Stop when the simplex spread in `1 − F` falls below this.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// First window of the continuation (ns); each stage is ten times longer.
    #[serde(rename = "first_window_ns", default = "default_first_window")]
    pub first_window: f64,
}

fn default_t0() -> f64 {
    20_000.0
}
fn default_samples() -> usize {
    50
}
fn default_tolerance() -> f64 {
    1e-12
}
fn default_first_window() -> f64 {
    20.0
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec { t0: default_t0(), n_samples: default_samples(), tolerance: default_tolerance(), first_window: default_first_window() }
    }
}

impl FitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(SimError::param("t0_ns", "must be positive"));
        }
        if self.n_samples < 8 {
            return Err(SimError::param("n_samples", "need at least 8 samples for 6 parameters"));
        }
        if !(self.first_window > 0.0) {
            return Err(SimError::param("first_window_ns", "must be positive"));
        }
        Ok(())
    }

    /// Windows of the continuation, ending at `t0`.
    pub fn windows(&self) -> Vec<f64> {
        let mut w = Vec::new();
        let mut t = self.first_window.min(self.t0);
        while t < self.t0 * (1.0 - 1e-12) {
            w.push(t);
            t *= 10.0;
        }
        w.push(self.t0);
        w
    }

    pub fn sample_times(&self, window: f64) -> Vec<f64> {
        (1..=self.n_samples).map(|k| window * k as f64 / self.n_samples as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub fitted: EffectiveParams,
    pub start: EffectiveParams,
    pub mean_fidelity: f64,
    pub start_fidelity: f64,
    #[serde(rename = "times_ns")]
    pub times: Vec<f64>,
    pub fidelities: Vec<f64>,
    /// `(window, mean fidelity)` after each continuation stage.
    pub stages: Vec<(f64, f64)>,
}

impl FitResult {
    /// `fitted − start` for `(ω_D, ω_T, ω_3, J_r, J_e, J_ZZ)`.
    pub fn deltas(&self) -> [f64; 6] {
        let (a, b) = (to_vec(&self.fitted), to_vec(&self.start));
        std::array::from_fn(|i| a[i] - b[i])
    }
}

fn to_vec(e: &EffectiveParams) -> [f64; 6] {
    [e.omega_d, e.omega_t, e.omega_3, e.j_r, e.j_e, e.j_zz]
}

fn from_vec(v: &[f64], template: &EffectiveParams) -> EffectiveParams {
    EffectiveParams { omega_d: v[0], omega_t: v[1], omega_3: v[2], j_r: v[3], j_e: v[4], j_zz: v[5], ..*template }
}

/// Target dynamics sampled on a time grid, and the averaged transformation
/// fidelity of an effective model against it.
pub struct FitTarget {
    pub times: Vec<f64>,
    pub unitaries: Vec<CMat>,
}

impl FitTarget {
    pub fn mean_fidelity(&self, eff: &EffectiveParams) -> Result<(f64, Vec<f64>)> {
        let h = build_effective_hamiltonian(eff)?;
        let e = eigh(&h)?;
        let vd = dagger(&e.vectors);
        let d = 8.0;
        let mut fs = Vec::with_capacity(self.times.len());
        for (u, &t) in self.unitaries.iter().zip(&self.times) {
            // Tr(U_a† V D V†) = Σ_n D_n (V† U_a† V)_nn
            let m = vd.dot(&dagger(u)).dot(&e.vectors);
            let tr: C64 = (0..8).map(|n| m[[n, n]] * C64::from_polar(1.0, -TWO_PI * e.values[n] * t)).sum();
            let fe = tr.norm_sqr() / (d * d);
            fs.push((d * fe + 1.0) / (d + 1.0));
        }
        let mean = fs.iter().sum::<f64>() / fs.len() as f64;
        Ok((mean, fs))
    }
}

/// Fit starting from `start` against dynamics supplied per window by
/// `target_for`.
pub fn fit_to(start: EffectiveParams, spec: &FitSpec, target_for: &dyn Fn(&[f64]) -> Result<FitTarget>) -> Result<FitResult> {
    spec.validate()?;
    let windows = spec.windows();
    let opts = SimplexOptions { step: 0.05, tolerance: spec.tolerance, max_iters: 4000 };
    let mut current = start;
    let mut stages = Vec::new();
    let mut first = true;
    for &w in &windows {
        let target = target_for(&spec.sample_times(w))?;
        let candidates = if first {
            // the sign of J_r is a convention of the effective model; take
            // whichever matches the dynamics
            vec![current, EffectiveParams { j_r: -current.j_r, ..current }]
        } else {
            vec![current]
        };
        first = false;
        let mut best: Option<(f64, EffectiveParams)> = None;
        for c in candidates {
            let base = to_vec(&c);
            // variables are parameter offsets in cycles over the window
            let cost = |x: &[f64]| {
                let v: Vec<f64> = base.iter().zip(x).map(|(b, dx)| b + dx / w).collect();
                target.mean_fidelity(&from_vec(&v, &c)).map_or(f64::INFINITY, |(f, _)| 1.0 - f)
            };
            let m = minimize_restarting(cost, &[0.0; 6], opts, 1)?;
            let v: Vec<f64> = base.iter().zip(&m.x).map(|(b, dx)| b + dx / w).collect();
            let f = 1.0 - m.value;
            if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best = Some((f, from_vec(&v, &c)));
            }
        }
        let (f, p) = best.unwrap();
        log::debug!("fit window {w} ns: mean fidelity {f:.6}");
        stages.push((w, f));
        current = p;
    }
    let target = target_for(&spec.sample_times(spec.t0))?;
    let (mean_fidelity, fidelities) = target.mean_fidelity(&current)?;
    let (start_fidelity, _) = target.mean_fidelity(&start)?;
    if mean_fidelity < 0.5 {
        return Err(SimError::FitFailed(format!(
            "fidelity plateau {mean_fidelity:.3} below 0.5; the logical labelling is probably wrong"
        )));
    }
    Ok(FitResult { fitted: current, start, mean_fidelity, start_fidelity, times: target.times, fidelities, stages })
}

/// Fit the effective model to the projected static dynamics of `params`,
/// starting from the analytic parameters.
pub fn fit_effective(params: &DeviceParams, spec: &FitSpec, model: &Model) -> Result<FitResult> {
    params.validate()?;
    let (_, _, start) = analyze(params, None)?;
    let proj = dressed_projector(params, &model.basis, &model.ops)?;
    let target_for = |times: &[f64]| -> Result<FitTarget> {
        let tr = propagate_static(&proj.eig, &proj.iso, times, false);
        Ok(FitTarget { times: times.to_vec(), unitaries: tr.u_proj })
    };
    fit_to(start, spec, &target_for)
}

/// One row of the effective-model validation table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "eps_GHz")]
    pub eps: f64,
    #[serde(rename = "t_T23_GHz")]
    pub t23: f64,
    #[serde(rename = "fit_omega_D_GHz")]
    pub fit_omega_d: f64,
    #[serde(rename = "fit_omega_T_GHz")]
    pub fit_omega_t: f64,
    #[serde(rename = "fit_omega_3_GHz")]
    pub fit_omega_3: f64,
    #[serde(rename = "fit_J_r_GHz")]
    pub fit_j_r: f64,
    #[serde(rename = "fit_J_e_GHz")]
    pub fit_j_e: f64,
    #[serde(rename = "fit_J_ZZ_GHz")]
    pub fit_j_zz: f64,
    #[serde(rename = "ana_omega_D_GHz")]
    pub ana_omega_d: f64,
    #[serde(rename = "ana_omega_T_GHz")]
    pub ana_omega_t: f64,
    #[serde(rename = "ana_omega_3_GHz")]
    pub ana_omega_3: f64,
    #[serde(rename = "ana_J_r_GHz")]
    pub ana_j_r: f64,
    #[serde(rename = "ana_J_e_GHz")]
    pub ana_j_e: f64,
    #[serde(rename = "ana_J_ZZ_GHz")]
    pub ana_j_zz: f64,
    pub fit_fidelity: f64,
    pub start_fidelity: f64,
}

impl SweepRow {
    fn new(eps: f64, t23: f64, r: &FitResult) -> Self {
        let (f, a) = (&r.fitted, &r.start);
        SweepRow {
            eps,
            t23,
            fit_omega_d: f.omega_d,
            fit_omega_t: f.omega_t,
            fit_omega_3: f.omega_3,
            fit_j_r: f.j_r,
            fit_j_e: f.j_e,
            fit_j_zz: f.j_zz,
            ana_omega_d: a.omega_d,
            ana_omega_t: a.omega_t,
            ana_omega_3: a.omega_3,
            ana_j_r: a.j_r,
            ana_j_e: a.j_e,
            ana_j_zz: a.j_zz,
            fit_fidelity: r.mean_fidelity,
            start_fidelity: r.start_fidelity,
        }
    }
}

/// Fit over a detuning sweep of the validation device, in parallel.
pub fn fit_sweep(eps: &[f64], t23: f64, n_r: usize, spec: &FitSpec) -> Result<Vec<SweepRow>> {
    let mut s = presets::model_validation(0.0, t23);
    s.n_r = n_r;
    fit_sweep_device(&s.to_device(), eps, spec, &Model::new(n_r)?)
}

/// Same sweep around an arbitrary device: `ε` sets the DQD detuning and the
/// detuning of the first two TQD dots symmetrically.
pub fn fit_sweep_device(base: &DeviceParams, eps: &[f64], spec: &FitSpec, model: &Model) -> Result<Vec<SweepRow>> {
    let t23 = base.tqd.t_t23.0.norm();
    eps.par_iter()
        .map(|&e| {
            let p = with_detuning(base, e);
            let r = fit_effective(&p, spec, model)?;
            Ok(SweepRow::new(e, t23, &r))
        })
        .collect()
}

pub fn with_detuning(base: &DeviceParams, eps: f64) -> DeviceParams {
    let mut p = base.clone();
    p.dqd.eps_d1 = 0.5 * eps;
    p.dqd.eps_d2 = -0.5 * eps;
    p.tqd.eps_t1 = 0.5 * eps;
    p.tqd.eps_t2 = -0.5 * eps;
    p
}
