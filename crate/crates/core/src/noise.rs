//! Quasistatic charge noise on the CNOT: Gaussian offsets of the dot
//! potentials and tunnel couplings, one fixed set per gate realisation.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::dressed_projector;
use crate::error::{Result, SimError};
use crate::gates::{cnot_fidelity_at, run_cnot, run_cnot_with, CnotRun, CnotSettings, CrossResonance, Model};
use crate::hamiltonian::{DeviceParams, Tunnel};

/// Perturbed parameters, in draw order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseParam {
    EpsD1,
    EpsD2,
    EpsT1,
    EpsT2,
    EpsT3,
    TD,
    TT12,
    TT23,
    TT31,
}

impl NoiseParam {
    pub const ALL: [NoiseParam; 9] = [
        NoiseParam::EpsD1,
        NoiseParam::EpsD2,
        NoiseParam::EpsT1,
        NoiseParam::EpsT2,
        NoiseParam::EpsT3,
        NoiseParam::TD,
        NoiseParam::TT12,
        NoiseParam::TT23,
        NoiseParam::TT31,
    ];

    pub fn is_tunnel(self) -> bool {
        matches!(self, NoiseParam::TD | NoiseParam::TT12 | NoiseParam::TT23 | NoiseParam::TT31)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Detuning-noise standard deviations to sweep (GHz).
    #[serde(rename = "sigmas_GHz")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// `σ_t = σ_ε / tunnel_ratio`.
    #[serde(default = "default_ratio")]
    pub tunnel_ratio: f64,
    #[serde(default = "yes")]
    pub perturb_eps: bool,
    #[serde(default = "yes")]
    pub perturb_tunnel: bool,
    /// Re-optimise the gate time per sample instead of holding the noiseless
    /// optimum.
    #[serde(default)]
    pub reoptimize_t_g: bool,
    /// Resampling attempts for draws that break charge localisation.
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
}

fn default_samples() -> usize {
    100
}
fn default_ratio() -> f64 {
    200.0
}
fn yes() -> bool {
    true
}
fn default_attempts() -> u32 {
    20
}

impl NoiseSpec {
    pub fn new(sigmas: Vec<f64>, n_samples: usize, seed: u64) -> Self {
        NoiseSpec {
            sigmas,
            n_samples,
            seed,
            tunnel_ratio: default_ratio(),
            perturb_eps: true,
            perturb_tunnel: true,
            reoptimize_t_g: false,
            max_attempts: default_attempts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(SimError::param("sigmas_GHz", "must be finite and non-negative"));
        }
        if self.n_samples == 0 {
            return Err(SimError::param("n_samples", "must be at least 1"));
        }
        if !(self.tunnel_ratio > 0.0) {
            return Err(SimError::param("tunnel_ratio", "must be positive"));
        }
        Ok(())
    }

    /// Standard deviation of `param` at detuning noise `sigma`.
    pub fn sigma_of(&self, param: NoiseParam, sigma: f64) -> f64 {
        match (param.is_tunnel(), self.perturb_tunnel, self.perturb_eps) {
            (true, true, _) => sigma / self.tunnel_ratio,
            (false, _, true) => sigma,
            _ => 0.0,
        }
    }
}

/// Standard-normal draw keyed by `(seed, σ index, sample, attempt, param)`.
/// Each key owns its own ChaCha stream, so results do not depend on the
/// order in which samples are evaluated.
pub fn normal_draw(seed: u64, sigma_index: usize, sample: usize, attempt: u32, param: NoiseParam) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((sigma_index as u64) << 40) ^ ((attempt as u64) << 32) ^ sample as u64);
    let slot = NoiseParam::ALL.iter().position(|p| *p == param).unwrap() as u128;
    // 256 words per parameter leave room for ziggurat rejections
    rng.set_word_pos(slot * 256);
    rng.sample(StandardNormal)
}

fn shift_tunnel(t: Tunnel, delta: f64) -> Tunnel {
    let phase = if t.0.norm() > 0.0 { t.0 / t.0.norm() } else { C64::new(1.0, 0.0) };
    Tunnel(t.0 + phase * delta)
}

/// The `sample`-th noisy realisation of `params` at `spec.sigmas[sigma_index]`.
/// Returns the device and the number of rejected draws.
pub fn sample_device(params: &DeviceParams, spec: &NoiseSpec, sigma_index: usize, sample: usize) -> Result<(DeviceParams, u32)> {
    spec.validate()?;
    let sigma = *spec.sigmas.get(sigma_index).ok_or_else(|| SimError::param("sigma_index", "out of range"))?;
    if sigma == 0.0 {
        return Ok((params.clone(), 0));
    }
    for attempt in 0..spec.max_attempts {
        let d = |p: NoiseParam| spec.sigma_of(p, sigma) * normal_draw(spec.seed, sigma_index, sample, attempt, p);
        let mut q = params.clone();
        q.dqd.eps_d1 += d(NoiseParam::EpsD1);
        q.dqd.eps_d2 += d(NoiseParam::EpsD2);
        q.tqd.eps_t1 += d(NoiseParam::EpsT1);
        q.tqd.eps_t2 += d(NoiseParam::EpsT2);
        q.tqd.eps_t3 += d(NoiseParam::EpsT3);
        q.dqd.t_d = shift_tunnel(q.dqd.t_d, d(NoiseParam::TD));
        q.tqd.t_t12 = shift_tunnel(q.tqd.t_t12, d(NoiseParam::TT12));
        q.tqd.t_t23 = shift_tunnel(q.tqd.t_t23, d(NoiseParam::TT23));
        if q.allow_t31 {
            q.tqd.t_t31 = shift_tunnel(q.tqd.t_t31, d(NoiseParam::TT31));
        }
        if q.validate().is_ok() {
            return Ok((q, attempt));
        }
    }
    Err(SimError::LocalizationViolated(format!(
        "sample {sample} at σ = {sigma} GHz broke localisation in {} attempts",
        spec.max_attempts
    )))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisePoint {
    #[serde(rename = "sigma_GHz")]
    pub sigma: f64,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
    /// Standard error of the mean.
    pub sem_infidelity: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_resampled: u32,
    pub infidelities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweepResult {
    pub baseline_infidelity: f64,
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
    pub cross_resonance: CrossResonance,
    pub points: Vec<NoisePoint>,
    /// Whether the mean infidelity never decreases with σ (reported only).
    pub monotone: bool,
}

fn stats(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt(), (var / n).sqrt())
}

/// CNOT infidelity statistics versus detuning-noise amplitude. The drive
/// calibration, frames and gate time stay at their noiseless values.
pub fn noise_sweep(params: &DeviceParams, settings: &CnotSettings, spec: &NoiseSpec, model: &Model) -> Result<NoiseSweepResult> {
    spec.validate()?;
    let nominal = run_cnot(params, settings, model)?;
    noise_sweep_from(params, settings, spec, model, &nominal)
}

/// As [`noise_sweep`], reusing a noiseless `run_cnot` of the same device and
/// settings.
pub fn noise_sweep_from(
    params: &DeviceParams,
    settings: &CnotSettings,
    spec: &NoiseSpec,
    model: &Model,
    nominal: &CnotRun,
) -> Result<NoiseSweepResult> {
    spec.validate()?;
    let cr = nominal.cross_resonance;
    let t_g = nominal.result.t_at_max_fidelity;
    let proj = dressed_projector(params, &model.basis, &model.ops)?;
    let baseline = 1.0 - cnot_fidelity_at(params, settings, model, &proj, cr, t_g)?.average_gate_fidelity;

    let jobs: Vec<(usize, usize)> = (0..spec.sigmas.len()).flat_map(|i| (0..spec.n_samples).map(move |k| (i, k))).collect();
    let outcomes: Vec<(usize, Result<(f64, u32)>)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let run = || -> Result<(f64, u32)> {
                let (q, rejected) = sample_device(params, spec, i, k)?;
                let proj_q = dressed_projector(&q, &model.basis, &model.ops)?;
                let f = if spec.reoptimize_t_g {
                    run_cnot_with(&q, settings, model, &proj_q, cr, nominal.couplings)?.result.max_fidelity
                } else {
                    cnot_fidelity_at(&q, settings, model, &proj_q, cr, t_g)?.average_gate_fidelity
                };
                Ok((1.0 - f, rejected))
            };
            (i, run())
        })
        .collect();

    let mut points = Vec::with_capacity(spec.sigmas.len());
    for (i, &sigma) in spec.sigmas.iter().enumerate() {
        let mut inf = Vec::new();
        let mut failed = 0;
        let mut resampled = 0;
        for (_, o) in outcomes.iter().filter(|(j, _)| *j == i) {
            match o {
                Ok((x, r)) => {
                    inf.push(*x);
                    resampled += r;
                }
                Err(e) => {
                    log::warn!("noise sample at σ = {sigma} failed: {e}");
                    failed += 1;
                }
            }
        }
        let (mean, std, sem) = stats(&inf);
        points.push(NoisePoint {
            sigma,
            mean_infidelity: mean,
            std_infidelity: std,
            sem_infidelity: sem,
            n_ok: inf.len(),
            n_failed: failed,
            n_resampled: resampled,
            infidelities: inf,
        });
    }
    let monotone = points.windows(2).all(|w| w[1].mean_infidelity >= w[0].mean_infidelity);
    Ok(NoiseSweepResult { baseline_infidelity: baseline, t_g, cross_resonance: cr, points, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::presets;

    #[test]
    fn zero_sigma_is_identity() {
        let p = presets::cnot(0.0).to_device();
        let spec = NoiseSpec::new(vec![0.0, 0.1], 4, 7);
        let (q, r) = sample_device(&p, &spec, 0, 3).unwrap();
        assert_eq!(q, p);
        assert_eq!(r, 0);
        assert_ne!(sample_device(&p, &spec, 1, 3).unwrap().0, p);
    }

    #[test]
    fn draws_are_keyed_not_ordered() {
        let a = normal_draw(11, 2, 5, 0, NoiseParam::EpsT2);
        let _ = normal_draw(11, 0, 0, 0, NoiseParam::EpsD1);
        assert_eq!(a.to_bits(), normal_draw(11, 2, 5, 0, NoiseParam::EpsT2).to_bits());
        assert_ne!(a, normal_draw(12, 2, 5, 0, NoiseParam::EpsT2));
        assert_ne!(a, normal_draw(11, 2, 6, 0, NoiseParam::EpsT2));
        assert_ne!(a, normal_draw(11, 2, 5, 0, NoiseParam::EpsT3));
    }

    #[test]
    fn sample_statistics_follow_the_ratio_rule() {
        let p = presets::cnot(0.0).to_device();
        let spec = NoiseSpec::new(vec![0.5], 10_000, 3);
        let n = spec.n_samples;
        let mut de = Vec::with_capacity(n);
        let mut dt = Vec::with_capacity(n);
        let mut cross = 0.0;
        for k in 0..n {
            let (q, _) = sample_device(&p, &spec, 0, k).unwrap();
            de.push(q.tqd.eps_t1 - p.tqd.eps_t1);
            dt.push(q.dqd.t_d.0.re - p.dqd.t_d.0.re);
            cross += (q.tqd.eps_t1 - p.tqd.eps_t1) * (q.tqd.eps_t2 - p.tqd.eps_t2);
        }
        let (m, s, _) = stats(&de);
        assert!(m.abs() < 4.0 * 0.5 / (n as f64).sqrt());
        assert!((s / 0.5 - 1.0).abs() < 0.03, "{s}");
        let (_, st, _) = stats(&dt);
        assert!((st / (0.5 / 200.0) - 1.0).abs() < 0.03, "{st}");
        // independent parameters
        assert!((cross / n as f64).abs() < 4.0 * 0.25 / (n as f64).sqrt());
    }

    #[test]
    fn tunnel_only_and_eps_only_switches() {
        let p = presets::cnot(0.0).to_device();
        let mut spec = NoiseSpec::new(vec![0.2], 1, 1);
        spec.perturb_tunnel = false;
        let (q, _) = sample_device(&p, &spec, 0, 0).unwrap();
        assert_eq!(q.dqd.t_d, p.dqd.t_d);
        assert_ne!(q.dqd.eps_d1, p.dqd.eps_d1);
        spec.perturb_tunnel = true;
        spec.perturb_eps = false;
        let (q, _) = sample_device(&p, &spec, 0, 0).unwrap();
        assert_eq!(q.dqd.eps_d1, p.dqd.eps_d1);
        assert_ne!(q.dqd.t_d, p.dqd.t_d);
        // a zero tunnel is perturbed along the real axis
        assert_eq!(q.tqd.t_t23.0.im, 0.0);
    }
}
