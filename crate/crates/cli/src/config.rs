//! Run configuration. JSON only; every dimensioned key carries its unit as a
//! suffix (`_GHz`, `_MHz`, `_ns`), and frequencies are ordinary frequencies
//! `ω/2π`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use qdsim::fitter::FitSpec;
use qdsim::gates::{CnotSettings, CzSettings, DEFAULT_DT};
use qdsim::hamiltonian::{presets, DeviceParams, DeviceSummary};
use qdsim::metrics::Gauge;
use qdsim::noise::NoiseSpec;
use qdsim::pulse::{ExchangeSource, FilterSpec, PulseSpec, Shape};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FitEffective,
    Cz,
    CzCompare,
    Cnot,
    CnotRobustness,
    NoiseSweep,
    PulseSpectrum,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::FitEffective,
        Experiment::Cz,
        Experiment::CzCompare,
        Experiment::Cnot,
        Experiment::CnotRobustness,
        Experiment::NoiseSweep,
        Experiment::PulseSpectrum,
    ];

    /// Key of the settings block that belongs to this experiment.
    pub fn block(self) -> &'static str {
        match self {
            Experiment::FitEffective => "fit_effective",
            Experiment::Cz => "cz",
            Experiment::CzCompare => "cz_compare",
            Experiment::Cnot => "cnot",
            Experiment::CnotRobustness => "cnot_robustness",
            Experiment::NoiseSweep => "noise_sweep",
            Experiment::PulseSpectrum => "pulse_spectrum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ModelValidation,
    Cz,
    Cnot,
}

/// A reference parameter set with the operating point left adjustable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetDevice {
    pub preset: Preset,
    /// Detuning of the DQD and of the first two TQD dots.
    #[serde(rename = "eps_GHz", default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(rename = "t_T23_GHz", default, skip_serializing_if = "Option::is_none")]
    pub t23: Option<f64>,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
}

fn default_n_r() -> usize {
    3
}

impl PresetDevice {
    pub fn summary(&self) -> DeviceSummary {
        let mut s = match self.preset {
            Preset::ModelValidation => presets::model_validation(self.eps.unwrap_or(0.0), self.t23.unwrap_or(1.0)),
            Preset::Cz => presets::cz(self.eps.unwrap_or(-15.0)),
            Preset::Cnot => presets::cnot(self.t23.unwrap_or(0.0)),
        };
        if let Some(e) = self.eps {
            s.eps_d = e;
            s.eps_t = e;
        }
        if let Some(t) = self.t23 {
            s.t_t23 = t;
        }
        s.n_r = self.n_r;
        s
    }
}

/// Either a named preset or the full parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DeviceConfig {
    Preset(PresetDevice),
    Explicit(DeviceParams),
}

impl<'de> Deserialize<'de> for DeviceConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        let preset = v.get("preset").is_some();
        // Report the nested key path inside the message; the outer path
        // stops at `device`.
        let wrap = |e: serde_path_to_error::Error<serde_json::Error>| D::Error::custom(format!("{}\u{1f}{}", e.path(), e.inner()));
        if preset {
            serde_path_to_error::deserialize(v).map(DeviceConfig::Preset).map_err(wrap)
        } else {
            serde_path_to_error::deserialize(v).map(DeviceConfig::Explicit).map_err(wrap)
        }
    }
}

impl DeviceConfig {
    pub fn params(&self) -> DeviceParams {
        match self {
            DeviceConfig::Preset(p) => p.summary().to_device(),
            DeviceConfig::Explicit(p) => p.clone(),
        }
    }

    fn set_n_r(&mut self, n_r: usize) {
        match self {
            DeviceConfig::Preset(p) => p.n_r = n_r,
            DeviceConfig::Explicit(p) => p.n_r = n_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitEffectiveBlock {
    #[serde(rename = "eps_GHz", default = "default_fit_eps")]
    pub eps: Vec<f64>,
    /// Tunnel couplings to sweep; the device value when absent.
    #[serde(rename = "t_T23_GHz", default, skip_serializing_if = "Option::is_none")]
    pub t23: Option<Vec<f64>>,
    #[serde(default)]
    pub fit: FitSpec,
}

fn default_fit_eps() -> Vec<f64> {
    vec![-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0]
}

impl Default for FitEffectiveBlock {
    fn default() -> Self {
        FitEffectiveBlock { eps: default_fit_eps(), t23: None, fit: FitSpec::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseVariant {
    Hann,
    Rect,
    FilteredHann,
    FilteredRect,
}

impl PulseVariant {
    pub fn name(self) -> &'static str {
        match self {
            PulseVariant::Hann => "hann",
            PulseVariant::Rect => "rect",
            PulseVariant::FilteredHann => "filtered-hann",
            PulseVariant::FilteredRect => "filtered-rect",
        }
    }

    pub fn pulse(self, t_g: f64, phase_index: u32, filter: FilterSpec) -> PulseSpec {
        let (shape, filtered) = match self {
            PulseVariant::Hann => (Shape::Hann, false),
            PulseVariant::Rect => (Shape::Rect, false),
            PulseVariant::FilteredHann => (Shape::Hann, true),
            PulseVariant::FilteredRect => (Shape::Rect, true),
        };
        let mut p = PulseSpec::new(shape, t_g);
        p.phase_index = phase_index;
        if filtered {
            p = p.with_filter(filter);
        }
        p
    }
}

/// How the CZ gate time is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GateTiming {
    Fixed {
        #[serde(rename = "t_g_ns")]
        t_g: f64,
        #[serde(default)]
        phase_index: u32,
    },
    /// `t_g ω_q / 2π = m` with conditional phase `(2n + 1)π`.
    Synchronized {
        m: u32,
        #[serde(default)]
        n: u32,
    },
    /// Like `synchronized` with a non-integer ratio.
    Ratio {
        x: f64,
        #[serde(default)]
        n: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzCompareBlock {
    #[serde(rename = "eps_GHz", default = "default_compare_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<PulseVariant>,
    #[serde(default = "default_timing")]
    pub timing: GateTiming,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    #[serde(rename = "sample_interval_ns", default = "default_interval")]
    pub sample_interval: f64,
    #[serde(rename = "dt_ns", default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gauge: Gauge,
    #[serde(default = "default_map_grid")]
    pub map_grid: usize,
    #[serde(default)]
    pub exchange_source: ExchangeSource,
}

fn default_compare_eps() -> Vec<f64> {
    vec![-15.0]
}
fn default_shapes() -> Vec<PulseVariant> {
    vec![PulseVariant::Hann, PulseVariant::Rect, PulseVariant::FilteredRect]
}
fn default_timing() -> GateTiming {
    GateTiming::Fixed { t_g: 100.0, phase_index: 0 }
}
fn default_window() -> f64 {
    0.5
}
fn default_interval() -> f64 {
    0.25
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_map_grid() -> usize {
    200
}

impl Default for CzCompareBlock {
    fn default() -> Self {
        CzCompareBlock {
            eps: default_compare_eps(),
            shapes: default_shapes(),
            timing: default_timing(),
            filter: FilterSpec::default(),
            window_fraction: default_window(),
            sample_interval: default_interval(),
            dt: default_dt(),
            gauge: Gauge::default(),
            map_grid: default_map_grid(),
            exchange_source: ExchangeSource::default(),
        }
    }
}

impl CzCompareBlock {
    pub fn settings(&self, pulse: PulseSpec) -> CzSettings {
        CzSettings {
            pulse,
            window_fraction: self.window_fraction,
            sample_interval: self.sample_interval,
            dt: self.dt,
            gauge: self.gauge,
            map_grid: self.map_grid,
            exchange_source: self.exchange_source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CnotBlock {
    /// Spectator tunnel couplings to run; the device value when absent.
    #[serde(rename = "t_T23_GHz", default, skip_serializing_if = "Option::is_none")]
    pub t23: Option<Vec<f64>>,
    #[serde(default)]
    pub settings: CnotSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnotRobustnessBlock {
    /// Drive detunings from the dressed T frequency.
    #[serde(rename = "detunings_MHz", default = "default_detunings")]
    pub detunings: Vec<f64>,
    #[serde(default)]
    pub settings: CnotSettings,
}

fn default_detunings() -> Vec<f64> {
    (-5..=5).map(|k| 0.2 * k as f64).collect()
}

impl Default for CnotRobustnessBlock {
    fn default() -> Self {
        CnotRobustnessBlock { detunings: default_detunings(), settings: CnotSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepBlock {
    #[serde(rename = "t_T23_GHz", default, skip_serializing_if = "Option::is_none")]
    pub t23: Option<Vec<f64>>,
    /// `seed` is overwritten by the run seed.
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub settings: CnotSettings,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::new(vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0], 100, 0)
}

impl Default for NoiseSweepBlock {
    fn default() -> Self {
        NoiseSweepBlock { t23: None, noise: default_noise(), settings: CnotSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpectrumBlock {
    /// Range of `t_g ω_q / 2π`.
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default)]
    pub phase_index: u32,
}

fn default_x_min() -> f64 {
    0.5
}
fn default_x_max() -> f64 {
    20.0
}
fn default_points() -> usize {
    781
}

impl Default for PulseSpectrumBlock {
    fn default() -> Self {
        PulseSpectrumBlock { x_min: default_x_min(), x_max: default_x_max(), n_points: default_points(), phase_index: 0 }
    }
}

impl PulseSpectrumBlock {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n).map(|k| self.x_min + (self.x_max - self.x_min) * k as f64 / (n - 1) as f64).collect()
    }
}

/// Overrides applied to the device and to every settings block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    #[serde(rename = "dt_ns", default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_r: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_effective: Option<FitEffectiveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz: Option<CzSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz_compare: Option<CzCompareBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnot: Option<CnotBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnot_robustness: Option<CnotRobustnessBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sweep: Option<NoiseSweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_spectrum: Option<PulseSpectrumBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl RunConfig {
    /// Minimal config for `experiment`; defaults are filled by [`finalize`].
    ///
    /// [`finalize`]: RunConfig::finalize
    pub fn new(device: DeviceConfig, experiment: Experiment) -> Self {
        RunConfig {
            device,
            experiment,
            fit_effective: None,
            cz: None,
            cz_compare: None,
            cnot: None,
            cnot_robustness: None,
            noise_sweep: None,
            pulse_spectrum: None,
            out_dir: None,
            seed: 0,
            integrator: Integrator::default(),
        }
    }

    fn present_blocks(&self) -> Vec<Experiment> {
        let has = [
            self.fit_effective.is_some(),
            self.cz.is_some(),
            self.cz_compare.is_some(),
            self.cnot.is_some(),
            self.cnot_robustness.is_some(),
            self.noise_sweep.is_some(),
            self.pulse_spectrum.is_some(),
        ];
        Experiment::ALL.iter().zip(has).filter(|(_, h)| *h).map(|(e, _)| *e).collect()
    }

    /// Fill the selected block with defaults, apply the integrator and seed
    /// overrides, and validate everything.
    pub fn finalize(mut self) -> Result<Self> {
        if let Some(other) = self.present_blocks().into_iter().find(|e| *e != self.experiment) {
            return Err(RunError::config(
                other.block(),
                format!("settings block given but experiment is `{}`", self.experiment.block().replace('_', "-")),
            ));
        }
        match self.experiment {
            Experiment::FitEffective => {
                self.fit_effective.get_or_insert_with(Default::default);
            }
            Experiment::Cz => {
                self.cz.get_or_insert_with(Default::default);
            }
            Experiment::CzCompare => {
                self.cz_compare.get_or_insert_with(Default::default);
            }
            Experiment::Cnot => {
                self.cnot.get_or_insert_with(Default::default);
            }
            Experiment::CnotRobustness => {
                self.cnot_robustness.get_or_insert_with(Default::default);
            }
            Experiment::NoiseSweep => {
                self.noise_sweep.get_or_insert_with(Default::default);
            }
            Experiment::PulseSpectrum => {
                self.pulse_spectrum.get_or_insert_with(Default::default);
            }
        }
        if let Some(n_r) = self.integrator.n_r {
            self.device.set_n_r(n_r);
        }
        if let Some(dt) = self.integrator.dt {
            if let Some(b) = &mut self.cz {
                b.dt = dt;
            }
            if let Some(b) = &mut self.cz_compare {
                b.dt = dt;
            }
            for s in [
                self.cnot.as_mut().map(|b| &mut b.settings),
                self.cnot_robustness.as_mut().map(|b| &mut b.settings),
                self.noise_sweep.as_mut().map(|b| &mut b.settings),
            ]
            .into_iter()
            .flatten()
            {
                s.dt = dt;
            }
        }
        let seed = self.seed;
        self = self.with_seed(seed);
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Some(b) = &mut self.noise_sweep {
            b.noise.seed = seed;
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let num = |key: &str, e: qdsim::error::SimError| RunError::config(key, e.to_string());
        let params = self.device.params();
        if params.n_r < 1 {
            return Err(RunError::config("device.n_r", "basis invariant violated: the resonator truncation n_r must be at least 1"));
        }
        params.validate().map_err(|e| num("device", e))?;
        if let Some(dt) = self.integrator.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(RunError::config("integrator.dt_ns", "must be positive"));
            }
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(RunError::config(key, "must be positive"))
            }
        };
        if let Some(b) = &self.fit_effective {
            b.fit.validate().map_err(|e| num("fit_effective.fit", e))?;
            if b.eps.is_empty() {
                return Err(RunError::config("fit_effective.eps_GHz", "empty sweep"));
            }
        }
        if let Some(b) = &self.cz {
            b.pulse.validate().map_err(|e| num("cz.pulse", e))?;
            positive("cz.dt_ns", b.dt)?;
            positive("cz.sample_interval_ns", b.sample_interval)?;
        }
        if let Some(b) = &self.cz_compare {
            positive("cz_compare.dt_ns", b.dt)?;
            positive("cz_compare.sample_interval_ns", b.sample_interval)?;
            if b.eps.is_empty() || b.shapes.is_empty() {
                return Err(RunError::config("cz_compare", "need at least one detuning and one shape"));
            }
            if let GateTiming::Fixed { t_g, .. } = b.timing {
                positive("cz_compare.timing.t_g_ns", t_g)?;
            }
        }
        for (key, s) in [
            ("cnot.settings", self.cnot.as_ref().map(|b| &b.settings)),
            ("cnot_robustness.settings", self.cnot_robustness.as_ref().map(|b| &b.settings)),
            ("noise_sweep.settings", self.noise_sweep.as_ref().map(|b| &b.settings)),
        ] {
            if let Some(s) = s {
                positive(&format!("{key}.dt_ns"), s.dt)?;
                positive(&format!("{key}.omega_eff_x_GHz"), s.omega_eff_x.abs())?;
            }
        }
        if let Some(b) = &self.noise_sweep {
            b.noise.validate().map_err(|e| num("noise_sweep.noise", e))?;
        }
        if let Some(b) = &self.cnot_robustness {
            if b.detunings.is_empty() {
                return Err(RunError::config("cnot_robustness.detunings_MHz", "empty grid"));
            }
        }
        if let Some(b) = &self.pulse_spectrum {
            if b.n_points < 2 || !(b.x_max > b.x_min) || !(b.x_min > 0.0) {
                return Err(RunError::config("pulse_spectrum", "need n_points >= 2 and 0 < x_min < x_max"));
            }
        }
        Ok(())
    }

    /// Device parameters after overrides.
    pub fn params(&self) -> DeviceParams {
        self.device.params()
    }
}

const UNITS: [&str; 10] = ["GHz", "MHz", "kHz", "Hz", "THz", "ns", "us", "ps", "s", "GSps"];

fn split_unit(key: &str) -> (&str, Option<&str>) {
    match key.rsplit_once('_') {
        Some((stem, unit)) if UNITS.contains(&unit) => (stem, Some(unit)),
        _ => (key, None),
    }
}

fn backticked(s: &str) -> Vec<&str> {
    s.split('`').skip(1).step_by(2).collect()
}

/// Turn serde's unknown-field message into a unit hint when the key only
/// differs from a known one by its unit suffix.
fn unit_hint(message: &str) -> Option<String> {
    let rest = message.split_once("unknown field ")?.1;
    let names = backticked(rest);
    let (found, expected) = names.split_first()?;
    let (stem, unit) = split_unit(found);
    let hit = expected.iter().find(|e| {
        let (s, u) = split_unit(e);
        s == stem && u != unit
    })?;
    Some(match unit {
        Some(u) => format!("unit-suffix mismatch: `{found}` is given in {u} but the key is `{hit}`"),
        None => format!("missing unit suffix: `{found}` must be written `{hit}`"),
    })
}

/// Parse and finalize a config from JSON text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let mut message = e.inner().to_string();
        // Nested device errors carry their inner path before a separator.
        if let Some((inner, msg)) = message.clone().split_once('\u{1f}') {
            if inner != "." {
                path = format!("{path}.{inner}");
            }
            message = msg.to_string();
        }
        if let Some(hint) = unit_hint(&message) {
            message = hint;
        }
        RunError::config(path, message)
    })?;
    cfg.finalize()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    parse_config(&text)
}

pub fn to_json(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_CZ: &str = r#"{"device": {"preset": "cz"}, "experiment": "cz"}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL_CZ).unwrap();
        let cz = c.cz.as_ref().unwrap();
        assert_eq!(c.params().n_r, 3);
        assert_eq!(cz.dt, 1e-3);
        assert_eq!(cz.window_fraction, 0.5);
        assert_eq!(cz.pulse.t_g, 100.0);
        assert_eq!(c.params().dqd.eps_d1, -7.5);
    }

    #[test]
    fn round_trip_is_identity() {
        for text in [
            MINIMAL_CZ,
            r#"{"device": {"preset": "cnot", "t_T23_GHz": 0.45}, "experiment": "noise-sweep", "seed": 7}"#,
            r#"{"device": {"preset": "model-validation"}, "experiment": "fit-effective", "integrator": {"n_r": 2}}"#,
        ] {
            let a = parse_config(text).unwrap();
            let b = parse_config(&to_json(&a)).unwrap();
            assert_eq!(a, b);
        }
        let explicit = RunConfig::new(DeviceConfig::Explicit(presets::cnot(0.0).to_device()), Experiment::Cnot).finalize().unwrap();
        assert_eq!(parse_config(&to_json(&explicit)).unwrap(), explicit);
    }

    #[test]
    fn zero_resonator_levels_rejected() {
        let e = parse_config(r#"{"device": {"preset": "cz", "n_r": 0}, "experiment": "cz"}"#).unwrap_err();
        assert!(matches!(e, RunError::Config { .. }));
        assert!(e.to_string().contains("basis invariant"), "{e}");
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let e = parse_config(r#"{"device": {"preset": "cz"}, "experiment": "cz", "cz": {"dt_ns": 0.001, "bogus": 1}}"#).unwrap_err();
        let RunError::Config { path, .. } = &e else { panic!("{e}") };
        assert!(path.starts_with("cz"), "{path}");
    }

    #[test]
    fn unit_suffix_mismatch_is_named() {
        let mut v: serde_json::Value = serde_json::to_value(presets::cnot(0.0).to_device()).unwrap();
        let o = v.as_object_mut().unwrap();
        let w = o.remove("omega_r_GHz").unwrap();
        o.insert("omega_r_MHz".into(), w);
        let text = serde_json::json!({"device": v, "experiment": "cnot"}).to_string();
        let e = parse_config(&text).unwrap_err();
        let RunError::Config { path, message } = &e else { panic!("{e}") };
        assert!(message.contains("unit-suffix mismatch"), "{message}");
        assert!(message.contains("omega_r_GHz"), "{message}");
        assert!(path.starts_with("device"), "{path}");

        let e = parse_config(r#"{"device": {"preset": "cz"}, "experiment": "cz", "cz": {"dt": 0.001}}"#).unwrap_err();
        assert!(e.to_string().contains("missing unit suffix"), "{e}");
    }

    #[test]
    fn foreign_block_rejected() {
        let e = parse_config(r#"{"device": {"preset": "cz"}, "experiment": "cz", "cnot": {}}"#).unwrap_err();
        assert!(e.to_string().contains("cnot"), "{e}");
    }

    #[test]
    fn integrator_overrides_apply() {
        let c = parse_config(r#"{"device": {"preset": "cnot"}, "experiment": "cnot", "integrator": {"dt_ns": 0.002, "n_r": 4}}"#).unwrap();
        assert_eq!(c.cnot.unwrap().settings.dt, 0.002);
        assert_eq!(c.device.params().n_r, 4);
    }

    #[test]
    fn seed_propagates_to_noise() {
        let c = parse_config(r#"{"device": {"preset": "cnot"}, "experiment": "noise-sweep", "seed": 11}"#).unwrap();
        assert_eq!(c.noise_sweep.as_ref().unwrap().noise.seed, 11);
        assert_eq!(c.with_seed(3).noise_sweep.unwrap().noise.seed, 3);
    }
}
