//! Named configurations for the reference figures.

use clap::ValueEnum;
use qdsim::fitter::FitSpec;
use qdsim::gates::CnotSettings;
use qdsim::metrics::Gauge;
use serde::Serialize;

use crate::config::{
    CnotBlock, CnotRobustnessBlock, CzCompareBlock, DeviceConfig, Experiment, FitEffectiveBlock, GateTiming, NoiseSweepBlock, Preset,
    PresetDevice, PulseSpectrumBlock, PulseVariant, RunConfig,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Figure {
    /// Effective-model validation sweep.
    Fig2,
    /// CZ, Hann 100 ns at two spectator couplings.
    Fig3a,
    /// CZ synchronized pulses, `t_g ω_q / 2π = 8`.
    Fig3c,
    /// CZ pulse shapes at 100 ns.
    Fig3d,
    /// Non-adiabatic error spectra.
    Fig3e,
    /// CNOT fidelity for three spectator couplings.
    Fig4a,
    /// CNOT robustness to the drive frequency.
    Fig4b,
    /// CNOT under quasistatic charge noise.
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 8] = [Figure::Fig2, Figure::Fig3a, Figure::Fig3c, Figure::Fig3d, Figure::Fig3e, Figure::Fig4a, Figure::Fig4b, Figure::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3c => "fig3c",
            Figure::Fig3d => "fig3d",
            Figure::Fig3e => "fig3e",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig5 => "fig5",
        }
    }

    pub fn config(self) -> Result<RunConfig> {
        let preset = |preset, eps, t23| DeviceConfig::Preset(PresetDevice { preset, eps, t23, n_r: 3 });
        let su2 = CnotSettings { gauge: Gauge::FullSu2, ..CnotSettings::default() };
        let mut c = match self {
            Figure::Fig2 => {
                let mut c = RunConfig::new(preset(Preset::ModelValidation, None, Some(1.0)), Experiment::FitEffective);
                c.fit_effective = Some(FitEffectiveBlock { t23: Some(vec![0.0, 0.5, 1.0]), fit: FitSpec::default(), ..Default::default() });
                c
            }
            Figure::Fig3a | Figure::Fig3c | Figure::Fig3d => {
                let mut c = RunConfig::new(preset(Preset::Cz, Some(-15.0), None), Experiment::CzCompare);
                let b = match self {
                    Figure::Fig3a => CzCompareBlock { eps: vec![-15.0, -10.5], shapes: vec![PulseVariant::Hann], ..Default::default() },
                    Figure::Fig3c => CzCompareBlock { timing: GateTiming::Synchronized { m: 8, n: 0 }, ..Default::default() },
                    _ => CzCompareBlock::default(),
                };
                c.cz_compare = Some(b);
                c
            }
            Figure::Fig3e => {
                let mut c = RunConfig::new(preset(Preset::Cz, None, None), Experiment::PulseSpectrum);
                c.pulse_spectrum = Some(PulseSpectrumBlock::default());
                c
            }
            Figure::Fig4a => {
                let mut c = RunConfig::new(preset(Preset::Cnot, None, Some(0.0)), Experiment::Cnot);
                c.cnot = Some(CnotBlock { t23: Some(vec![0.0, 0.45, 0.8]), settings: su2 });
                c
            }
            Figure::Fig4b => {
                let mut c = RunConfig::new(preset(Preset::Cnot, None, Some(0.0)), Experiment::CnotRobustness);
                c.cnot_robustness = Some(CnotRobustnessBlock { settings: su2, ..Default::default() });
                c
            }
            Figure::Fig5 => {
                let mut c = RunConfig::new(preset(Preset::Cnot, None, Some(0.0)), Experiment::NoiseSweep);
                c.noise_sweep = Some(NoiseSweepBlock { t23: Some(vec![0.0, 0.8]), settings: su2, ..Default::default() });
                c
            }
        };
        c.out_dir = Some(self.name().into());
        c.finalize()
    }
}
