//! Experiment dispatch and the CSV/JSON artifact schemas.

use std::path::Path;

use qdsim::effective::analyze;
use qdsim::fitter::{fit_sweep_device, SweepRow};
use qdsim::gates::{drive_detuning_robustness, run_cnot, run_cz, CnotSettings, CrossResonance, CzSettings, GateResult, Model};
use qdsim::hamiltonian::{DeviceParams, Tunnel};
use qdsim::noise::{noise_sweep, NoiseSpec};
use qdsim::pulse::{gate_time_for_ratio, nonadiabatic_error_spectrum, ControlWaveform, SyncSolution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CzCompareBlock, Experiment, GateTiming, RunConfig};
use crate::error::{Result, RunError};
use crate::manifest::{ArtifactWriter, RunManifest};

/// Row of `cz_compare.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzCompareRow {
    #[serde(rename = "eps_GHz")]
    pub eps: f64,
    pub shape: String,
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
    #[serde(rename = "control_end_ns")]
    pub control_end: f64,
    pub max_infidelity_after_pulse: f64,
    pub min_unitarity: f64,
    pub max_fidelity: f64,
    pub trace_file: String,
}

/// Row of `*_control.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlRow {
    #[serde(rename = "t_ns")]
    pub t: f64,
    #[serde(rename = "J_e_MHz")]
    pub j_e_mhz: f64,
    #[serde(rename = "t_T23_GHz")]
    pub t23: f64,
}

/// Row of `cnot_summary.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnotRow {
    #[serde(rename = "t_T23_GHz")]
    pub t23: f64,
    pub max_fidelity: f64,
    #[serde(rename = "t_at_max_fidelity_ns")]
    pub t_at_max: f64,
    pub min_unitarity: f64,
    #[serde(rename = "J_zx_GHz")]
    pub j_zx: f64,
    #[serde(rename = "t_g_predicted_ns")]
    pub t_g_predicted: f64,
    pub trace_file: String,
}

/// Row of `noise_sweep.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseRow {
    #[serde(rename = "t_T23_GHz")]
    pub t23: f64,
    #[serde(rename = "sigma_GHz")]
    pub sigma: f64,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
    pub sem_infidelity: f64,
    pub baseline_infidelity: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_resampled: u32,
}

/// Row of `noise_samples.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSampleRow {
    #[serde(rename = "t_T23_GHz")]
    pub t23: f64,
    #[serde(rename = "sigma_GHz")]
    pub sigma: f64,
    pub sample: usize,
    pub infidelity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateArtifact<S> {
    pub device: DeviceParams,
    pub settings: S,
    pub summary: GateResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncSolution>,
    #[serde(rename = "delta_omega_GHz", default, skip_serializing_if = "Option::is_none")]
    pub delta_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_resonance: Option<CrossResonance>,
    pub trace_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseArtifact {
    #[serde(rename = "t_T23_GHz")]
    pub t23: f64,
    pub baseline_infidelity: f64,
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
    pub monotone: bool,
    pub cross_resonance: CrossResonance,
    pub spec: NoiseSpec,
}

fn operating_eps(p: &DeviceParams) -> f64 {
    p.dqd.eps_d1 - p.dqd.eps_d2
}

fn with_t23(p: &DeviceParams, t23: f64) -> DeviceParams {
    let mut q = p.clone();
    q.tqd.t_t23 = Tunnel::real(t23);
    q
}

pub fn cz_stem(label: &str, t_g: f64, eps: f64) -> String {
    format!("cz_{label}_tg{t_g:.2}ns_eps{eps:+.2}GHz")
}

pub fn cnot_stem(t23: f64) -> String {
    format!("cnot_t23_{t23:.3}GHz")
}

fn control_rows(c: &ControlWaveform) -> Vec<ControlRow> {
    c.times.iter().zip(&c.j_e).zip(&c.t23).map(|((&t, &j_e), &t23)| ControlRow { t, j_e_mhz: 1e3 * j_e, t23 }).collect()
}

fn model_for(p: &DeviceParams) -> Result<Model> {
    Ok(Model::new(p.n_r)?)
}

/// Run the configured experiment into `out` and write the manifest. On
/// failure the manifest is still written, marked partial.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunManifest> {
    let mut w = ArtifactWriter::new(out)?;
    let outcome = dispatch(config, &mut w);
    match outcome {
        Ok(()) => w.finish(config, None),
        Err(e) => {
            w.finish(config, Some(e.to_string()))?;
            Err(e)
        }
    }
}

fn dispatch(config: &RunConfig, w: &mut ArtifactWriter) -> Result<()> {
    let missing = || RunError::config(config.experiment.block(), "settings block missing; call finalize first");
    let params = config.params();
    match config.experiment {
        Experiment::FitEffective => {
            let b = config.fit_effective.as_ref().ok_or_else(missing)?;
            let model = model_for(&params)?;
            let t23s = b.t23.clone().unwrap_or_else(|| vec![params.tqd.t_t23.0.norm()]);
            let rows = w.time("fit", |_| {
                let mut rows: Vec<SweepRow> = Vec::new();
                for &t in &t23s {
                    rows.extend(fit_sweep_device(&with_t23(&params, t), &b.eps, &b.fit, &model)?);
                }
                Ok(rows)
            })?;
            w.write_csv("fit_effective.csv", &rows)
        }
        Experiment::Cz => {
            let s = config.cz.as_ref().ok_or_else(missing)?;
            let model = model_for(&params)?;
            let run = w.time("cz", |_| Ok(run_cz(&params, s, &model)?))?;
            let stem = cz_stem(&run.result.label, s.pulse.t_g, operating_eps(&params));
            write_cz(w, &stem, &params, s, &run.result, &run.control, run.delta_omega, None)
        }
        Experiment::CzCompare => {
            let b = config.cz_compare.as_ref().ok_or_else(missing)?;
            cz_compare(w, &params, b)
        }
        Experiment::Cnot => {
            let b = config.cnot.as_ref().ok_or_else(missing)?;
            let model = model_for(&params)?;
            let t23s = b.t23.clone().unwrap_or_else(|| vec![params.tqd.t_t23.0.norm()]);
            let runs = w.time("cnot", |_| {
                t23s.par_iter().map(|&t| Ok((t, run_cnot(&with_t23(&params, t), &b.settings, &model)?))).collect::<Result<Vec<_>>>()
            })?;
            let mut rows = Vec::new();
            for (t, run) in runs {
                let stem = cnot_stem(t);
                let trace_file = format!("{stem}_trace.csv");
                w.write_csv(&trace_file, &run.result.trace)?;
                let art = GateArtifact {
                    device: with_t23(&params, t),
                    settings: b.settings.clone(),
                    summary: run.result.summary(),
                    sync: None,
                    delta_omega: None,
                    cross_resonance: Some(run.cross_resonance),
                    trace_file: trace_file.clone(),
                };
                w.write_json(&format!("{stem}.json"), &art)?;
                rows.push(CnotRow {
                    t23: t,
                    max_fidelity: run.result.max_fidelity,
                    t_at_max: run.result.t_at_max_fidelity,
                    min_unitarity: run.result.min_unitarity,
                    j_zx: run.cross_resonance.j_zx,
                    t_g_predicted: run.cross_resonance.t_g_predicted,
                    trace_file,
                });
            }
            w.write_csv("cnot_summary.csv", &rows)
        }
        Experiment::CnotRobustness => {
            let b = config.cnot_robustness.as_ref().ok_or_else(missing)?;
            let model = model_for(&params)?;
            let pts = w.time("robustness", |_| Ok(drive_detuning_robustness(&params, &b.settings, &model, &b.detunings)?))?;
            w.write_csv("cnot_robustness.csv", &pts)
        }
        Experiment::NoiseSweep => {
            let b = config.noise_sweep.as_ref().ok_or_else(missing)?;
            noise(w, &params, b.t23.as_deref(), &b.noise, &b.settings)
        }
        Experiment::PulseSpectrum => {
            let b = config.pulse_spectrum.as_ref().ok_or_else(missing)?;
            let pts = nonadiabatic_error_spectrum(&b.grid(), b.phase_index)?;
            w.write_csv("pulse_spectrum.csv", &pts)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn write_cz(
    w: &mut ArtifactWriter,
    stem: &str,
    params: &DeviceParams,
    settings: &CzSettings,
    result: &GateResult,
    control: &ControlWaveform,
    delta: f64,
    sync: Option<SyncSolution>,
) -> Result<()> {
    let trace_file = format!("{stem}_trace.csv");
    w.write_csv(&trace_file, &result.trace)?;
    w.write_csv(&format!("{stem}_control.csv"), &control_rows(control))?;
    let art = GateArtifact {
        device: params.clone(),
        settings: settings.clone(),
        summary: result.summary(),
        sync,
        delta_omega: Some(delta),
        cross_resonance: None,
        trace_file,
    };
    w.write_json(&format!("{stem}.json"), &art)
}

fn cz_compare(w: &mut ArtifactWriter, base: &DeviceParams, b: &CzCompareBlock) -> Result<()> {
    let model = model_for(base)?;
    let mut jobs = Vec::new();
    for &eps in &b.eps {
        let p = qdsim::fitter::with_detuning(base, eps);
        let (_, _, eff) = analyze(&p, None)?;
        let delta = eff.omega_t - eff.omega_3;
        let (t_g, n, sync) = match b.timing {
            GateTiming::Fixed { t_g, phase_index } => (t_g, phase_index, None),
            GateTiming::Synchronized { m, n } => {
                let s = gate_time_for_ratio(delta, m as f64, n)?;
                (s.t_g, n, Some(s))
            }
            GateTiming::Ratio { x, n } => {
                let s = gate_time_for_ratio(delta, x, n)?;
                (s.t_g, n, Some(s))
            }
        };
        for &shape in &b.shapes {
            jobs.push((eps, p.clone(), shape, b.settings(shape.pulse(t_g, n, b.filter)), delta, sync));
        }
    }
    let runs = w.time("cz", |_| {
        jobs.par_iter().map(|(_, p, _, s, _, _)| Ok(run_cz(p, s, &model)?)).collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for ((eps, p, shape, s, delta, sync), run) in jobs.iter().zip(runs) {
        let stem = cz_stem(shape.name(), s.pulse.t_g, *eps);
        write_cz(w, &stem, p, s, &run.result, &run.control, *delta, *sync)?;
        rows.push(CzCompareRow {
            eps: *eps,
            shape: shape.name().to_string(),
            t_g: s.pulse.t_g,
            control_end: run.result.control_end,
            max_infidelity_after_pulse: run.result.max_infidelity_after_pulse,
            min_unitarity: run.result.min_unitarity,
            max_fidelity: run.result.max_fidelity,
            trace_file: format!("{stem}_trace.csv"),
        });
    }
    w.write_csv("cz_compare.csv", &rows)
}

fn noise(w: &mut ArtifactWriter, params: &DeviceParams, t23s: Option<&[f64]>, spec: &NoiseSpec, settings: &CnotSettings) -> Result<()> {
    let model = model_for(params)?;
    let t23s = t23s.map(<[f64]>::to_vec).unwrap_or_else(|| vec![params.tqd.t_t23.0.norm()]);
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut arts = Vec::new();
    for t in t23s {
        let r = w.time(&format!("noise t23={t}"), |_| Ok(noise_sweep(&with_t23(params, t), settings, spec, &model)?))?;
        for pt in &r.points {
            rows.push(NoiseRow {
                t23: t,
                sigma: pt.sigma,
                mean_infidelity: pt.mean_infidelity,
                std_infidelity: pt.std_infidelity,
                sem_infidelity: pt.sem_infidelity,
                baseline_infidelity: r.baseline_infidelity,
                n_ok: pt.n_ok,
                n_failed: pt.n_failed,
                n_resampled: pt.n_resampled,
            });
            samples.extend(pt.infidelities.iter().enumerate().map(|(k, &x)| NoiseSampleRow { t23: t, sigma: pt.sigma, sample: k, infidelity: x }));
        }
        arts.push(NoiseArtifact {
            t23: t,
            baseline_infidelity: r.baseline_infidelity,
            t_g: r.t_g,
            monotone: r.monotone,
            cross_resonance: r.cross_resonance,
            spec: spec.clone(),
        });
    }
    w.write_csv("noise_sweep.csv", &rows)?;
    w.write_csv("noise_samples.csv", &samples)?;
    w.write_json("noise_sweep.json", &arts)
}
