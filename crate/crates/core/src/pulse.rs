//! Exchange pulse shapes, non-adiabatic error spectra, gate-time
//! synchronization, inversion of a target exchange profile into the `t_T23`
//! control, and Butterworth low-pass filtering.
//!
//! Exchange values are in GHz unless a name says otherwise.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, build_operators};
use crate::effective::{analyze, dressed_projector, pauli_decompose, pauli_index};
use crate::error::{Result, SimError};
use crate::hamiltonian::{build_static, DeviceParams, Tunnel, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Rect,
    Hann,
    /// `Σ_n λ_n (1 − cos(2π n t / t_g))`, `n = 1, 2, …`.
    Fourier { lambdas: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(rename = "cutoff_GHz", default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_order() -> usize {
    6
}
fn default_cutoff() -> f64 {
    0.1
}
fn default_rate() -> f64 {
    10.0
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { order: default_order(), cutoff: default_cutoff() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub shape: Shape,
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
    /// Peak exchange scale; when absent it follows from the CZ condition
    /// `J_0 t_g = 2n + 1`.
    #[serde(rename = "J0_MHz", default, skip_serializing_if = "Option::is_none")]
    pub j0_mhz: Option<f64>,
    #[serde(default)]
    pub phase_index: u32,
    #[serde(rename = "sample_rate_GSps", default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSpec>,
}

/// Peak exchange (GHz) that accumulates a conditional phase of `(2n+1)π`.
pub fn cz_j0(t_g: f64, n: u32) -> f64 {
    (2 * n + 1) as f64 / t_g
}

impl PulseSpec {
    pub fn new(shape: Shape, t_g: f64) -> Self {
        PulseSpec { shape, t_g, j0_mhz: None, phase_index: 0, sample_rate: default_rate(), filter: None }
    }

    pub fn with_filter(mut self, f: FilterSpec) -> Self {
        self.filter = Some(f);
        self
    }

    pub fn j0(&self) -> f64 {
        self.j0_mhz.map_or_else(|| cz_j0(self.t_g, self.phase_index), |v| v * 1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_g > 0.0) || !self.t_g.is_finite() {
            return Err(SimError::param("pulse.t_g_ns", "must be positive"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(SimError::param("pulse.sample_rate_GSps", "must be positive"));
        }
        if let Some(j) = self.j0_mhz {
            if !(j >= 0.0) {
                return Err(SimError::param("pulse.J0_MHz", "must be non-negative"));
            }
        }
        if let Shape::Fourier { lambdas } = &self.shape {
            if lambdas.is_empty() {
                return Err(SimError::param("pulse.shape.lambdas", "need at least one coefficient"));
            }
            let sum: f64 = lambdas.iter().sum();
            if (sum - 0.5).abs() > 1e-9 {
                return Err(SimError::param("pulse.shape.lambdas", format!("must sum to 1/2 (mean J_0/2), got {sum}")));
            }
            for k in 0..=2000 {
                if self.window(self.t_g * k as f64 / 2000.0) < -1e-12 {
                    return Err(SimError::param("pulse.shape.lambdas", "window goes negative"));
                }
            }
        }
        if let Some(f) = &self.filter {
            f.validate(self.sample_rate)?;
        }
        Ok(())
    }

    /// Dimensionless window `J_e(t) / J_0`; zero outside `[0, t_g]`.
    pub fn window(&self, t: f64) -> f64 {
        if !(0.0..=self.t_g).contains(&t) {
            return 0.0;
        }
        let ph = 2.0 * PI * t / self.t_g;
        match &self.shape {
            Shape::Rect => 0.5,
            Shape::Hann => 0.5 * (1.0 - ph.cos()),
            Shape::Fourier { lambdas } => {
                lambdas.iter().enumerate().map(|(k, l)| l * (1.0 - ((k + 1) as f64 * ph).cos())).sum()
            }
        }
    }

    pub fn exchange(&self, t: f64) -> f64 {
        self.j0() * self.window(t)
    }

    pub fn exchange_mhz(&self, t: f64) -> f64 {
        1e3 * self.exchange(t)
    }
}

/// `J_e(t)` in MHz.
pub fn sample_exchange_profile(spec: &PulseSpec, t: f64) -> f64 {
    spec.exchange_mhz(t)
}

/// `sin(x)/x`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `α = (Δω t_g / π)² = 4x² − (2n+1)²` with `x = t_g ω_q / 2π`.
fn alpha(x: f64, n: u32) -> f64 {
    4.0 * x * x - ((2 * n + 1) as f64).powi(2)
}

/// Unnormalized rectangular-pulse error `sin²(πx)/α`; `None` where the
/// closure has no solution (`α ≤ 0`).
pub fn spectrum_rect(x: f64, n: u32) -> Option<f64> {
    let a = alpha(x, n);
    (a > 0.0).then(|| (PI * x).sin().powi(2) / a)
}

/// Hann-window error `sin²(πx)/(α |1 − x²|²)`, continuous through `x = 1`.
pub fn spectrum_hann(x: f64, n: u32) -> Option<f64> {
    let a = alpha(x, n);
    if a <= 0.0 {
        return None;
    }
    let d = x - 1.0;
    let ratio = if d.abs() < 1e-3 {
        // sin(πx)/(1 − x²) = π sinc(πd)/(2 + d) up to sign
        PI * sinc(PI * d) / (2.0 + d)
    } else {
        (PI * x).sin() / (1.0 - x * x)
    };
    Some(ratio * ratio / a)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub tg_wq_over_2pi: f64,
    #[serde(rename = "Pe_rect")]
    pub pe_rect: f64,
    #[serde(rename = "Pe_hann")]
    pub pe_hann: f64,
}

/// Both spectra on `xs`, normalized by the largest rectangular value.
pub fn nonadiabatic_error_spectrum(xs: &[f64], n: u32) -> Result<Vec<SpectrumPoint>> {
    let raw: Vec<(f64, f64, f64)> = xs
        .iter()
        .filter_map(|&x| Some((x, spectrum_rect(x, n)?, spectrum_hann(x, n)?)))
        .collect();
    let norm = raw.iter().map(|r| r.1).fold(0.0, f64::max);
    if raw.is_empty() || norm <= 0.0 {
        return Err(SimError::param("grid", "no grid point with a valid closure"));
    }
    Ok(raw.into_iter().map(|(x, r, h)| SpectrumPoint { tg_wq_over_2pi: x, pe_rect: r / norm, pe_hann: h / norm }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncSolution {
    #[serde(rename = "t_g_ns")]
    pub t_g: f64,
    /// `t_g ω_q / 2π`.
    pub m: f64,
    pub n: u32,
    /// Mean exchange `J̄ = (2n+1)/(2 t_g)` (GHz).
    #[serde(rename = "J_mean_GHz")]
    pub j_mean: f64,
    #[serde(rename = "omega_q_GHz")]
    pub omega_q: f64,
}

/// Gate time with `t_g ω_q / 2π = x` and conditional phase `(2n+1)π`, where
/// `ω_q = √(J̄² + Δ²)`.
pub fn gate_time_for_ratio(delta: f64, x: f64, n: u32) -> Result<SyncSolution> {
    let rad = 4.0 * x * x - ((2 * n + 1) as f64).powi(2);
    if rad <= 0.0 || !(delta.abs() > 0.0) {
        return Err(SimError::param("sync", format!("no gate time for m = {x}, n = {n}")));
    }
    let t_g = rad.sqrt() / (2.0 * delta.abs());
    let j_mean = (2 * n + 1) as f64 / (2.0 * t_g);
    Ok(SyncSolution { t_g, m: x, n, j_mean, omega_q: (j_mean * j_mean + delta * delta).sqrt() })
}

pub fn sync_gate_time(delta: f64, m: u32, n: u32) -> Result<SyncSolution> {
    gate_time_for_ratio(delta, m as f64, n)
}

/// The phase index whose synchronized gate time is closest to `t_g`.
pub fn recover_phase_index(delta: f64, m: u32, t_g: f64) -> Option<u32> {
    (0..m)
        .filter_map(|n| sync_gate_time(delta, m, n).ok().map(|s| (n, (s.t_g - t_g).abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, _)| n)
}

/// Where the exchange of the `t_T23 → J_e` map comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExchangeSource {
    /// Closed-form effective-model `J_e`.
    #[default]
    Effective,
    /// Conditional energy `4 c_zz` of the projected full Hamiltonian
    /// `P† H P`, where `c_zz` multiplies `σ_T^z σ_3^z`. Tabulated once and
    /// interpolated.
    Projected,
}

/// Monotone map `t_T23 → J_e` with pointwise inversion.
#[derive(Debug, Clone)]
pub struct ExchangeMap {
    base: DeviceParams,
    pub source: ExchangeSource,
    pub t23: Vec<f64>,
    pub j: Vec<f64>,
    /// PCHIP slopes `dJ/d(t²)` at the grid points (projected source only).
    slopes: Vec<f64>,
}

impl ExchangeMap {
    pub fn new(params: &DeviceParams, n_grid: usize) -> Result<Self> {
        Self::with_source(params, n_grid, ExchangeSource::Effective)
    }

    pub fn with_source(params: &DeviceParams, n_grid: usize, source: ExchangeSource) -> Result<Self> {
        let (g2, g1, gu) = params.localization_gaps();
        let t_max = g2.min(g1).min(gu) / params.localization_margin * (1.0 - 1e-9);
        if !(t_max > 0.0) {
            return Err(SimError::LocalizationViolated("no admissible t_T23 range".into()));
        }
        let n = n_grid.max(2);
        let mut t23: Vec<f64> = (0..=n).map(|k| t_max * k as f64 / n as f64).collect();
        let j = match source {
            ExchangeSource::Effective => {
                t23.iter().map(|&t| Ok(analyze(&with_t23(params, t), None)?.2.j_e)).collect::<Result<Vec<_>>>()?
            }
            ExchangeSource::Projected => {
                let basis = build_basis(params.n_r)?;
                let ops = build_operators(&basis);
                let mut out = Vec::with_capacity(t23.len());
                for &t in &t23 {
                    let p = with_t23(params, t);
                    // the table ends where the logical states stop being
                    // identifiable
                    let proj = match dressed_projector(&p, &basis, &ops) {
                        Ok(proj) => proj,
                        Err(SimError::DegenerateSubspace(msg)) if out.len() >= 3 => {
                            log::debug!("projected exchange map truncated at t_T23 = {t}: {msg}");
                            break;
                        }
                        Err(e) => return Err(e),
                    };
                    let c = pauli_decompose(&proj.project(&build_static(&p, &ops)?));
                    let j = 4.0 * c[pauli_index(0, 3, 3)].re;
                    if out.len() >= 3 && out.last().is_some_and(|&prev| j <= prev) {
                        log::debug!("projected exchange map truncated at t_T23 = {t}: turns non-monotone");
                        break;
                    }
                    out.push(j);
                }
                // the t = 0 value is the static residual coupling; measure
                // the map from it so that J(0) = 0 exactly
                let j0 = out[0];
                out.iter_mut().for_each(|v| *v -= j0);
                out
            }
        };
        t23.truncate(j.len());
        for k in 1..j.len() {
            if j[k] <= j[k - 1] {
                return Err(SimError::NonMonotoneMap(t23[k]));
            }
        }
        let slopes = match source {
            ExchangeSource::Effective => Vec::new(),
            ExchangeSource::Projected => pchip_slopes(&t23.iter().map(|t| t * t).collect::<Vec<_>>(), &j),
        };
        Ok(ExchangeMap { base: params.clone(), source, t23, j, slopes })
    }

    /// Exchange at tunnel magnitude `t23` (sign-even).
    pub fn exchange(&self, t23: f64) -> Result<f64> {
        let t = t23.abs();
        match self.source {
            ExchangeSource::Effective => Ok(analyze(&with_t23(&self.base, t), None)?.2.j_e),
            ExchangeSource::Projected => {
                let t_max = *self.t23.last().unwrap();
                if t > t_max * (1.0 + 1e-12) {
                    return Err(SimError::param("t_T23", format!("{t} outside the tabulated range [0, {t_max}]")));
                }
                let k = self.t23.partition_point(|&v| v <= t).clamp(1, self.t23.len() - 1);
                let (s0, s1, s) = (self.t23[k - 1].powi(2), self.t23[k].powi(2), t * t);
                let h = s1 - s0;
                let u = (s - s0) / h;
                let (h00, h10, h01, h11) =
                    (2.0 * u.powi(3) - 3.0 * u * u + 1.0, u.powi(3) - 2.0 * u * u + u, -2.0 * u.powi(3) + 3.0 * u * u, u.powi(3) - u * u);
                Ok(h00 * self.j[k - 1] + h10 * h * self.slopes[k - 1] + h01 * self.j[k] + h11 * h * self.slopes[k])
            }
        }
    }

    pub fn max_exchange(&self) -> f64 {
        *self.j.last().unwrap()
    }

    pub fn invert(&self, target: f64) -> Result<f64> {
        if !(target >= 0.0) {
            return Err(SimError::param("J_e target", "must be non-negative"));
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        if target > self.max_exchange() {
            return Err(SimError::ExchangeOutOfRange { target, lo: 0.0, hi: self.max_exchange() });
        }
        let k = self.j.partition_point(|&v| v < target).max(1);
        let (mut lo, mut hi) = (self.t23[k - 1], self.t23[k]);
        let (mut flo, mut fhi) = (self.j[k - 1] - target, self.j[k] - target);
        // Illinois-modified regula falsi inside the tabulated bracket
        let mut side = 0;
        for _ in 0..200 {
            let mid = if fhi != flo { (lo * fhi - hi * flo) / (fhi - flo) } else { 0.5 * (lo + hi) };
            let fm = self.exchange(mid)? - target;
            if fm == 0.0 || (hi - lo) < 1e-15 * hi.max(1.0) {
                return Ok(mid);
            }
            if (fm > 0.0) == (fhi > 0.0) {
                hi = mid;
                fhi = fm;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            } else {
                lo = mid;
                flo = fm;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            }
            if fm.abs() <= 1e-14 * target {
                return Ok(mid);
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn with_t23(base: &DeviceParams, t23: f64) -> DeviceParams {
    let mut p = base.clone();
    let phase = if base.tqd.t_t23.0.norm() > 0.0 { base.tqd.t_t23.0 / base.tqd.t_t23.0.norm() } else { C64::new(1.0, 0.0) };
    p.tqd.t_t23 = Tunnel(phase * t23);
    p
}

/// Fritsch–Carlson monotone cubic slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m
}

pub fn invert_exchange_to_tunnel(targets: &[f64], map: &ExchangeMap) -> Result<Vec<f64>> {
    targets.iter().map(|&j| map.invert(j)).collect()
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.order < 1 {
            return Err(SimError::param("filter.order", "must be at least 1"));
        }
        if !(self.cutoff > 0.0) {
            return Err(SimError::param("filter.cutoff_GHz", "must be positive"));
        }
        if sample_rate < 20.0 * self.cutoff {
            return Err(SimError::param("filter", "sample rate must be at least 20 x cutoff"));
        }
        Ok(())
    }
}

/// Digital Butterworth low-pass as second-order sections `[b0, b1, b2, a1, a2]`
/// (`a0 = 1`), designed by the prewarped bilinear transform.
#[derive(Debug, Clone)]
pub struct Butterworth {
    pub sections: Vec<[f64; 5]>,
    pub sample_rate: f64,
}

impl Butterworth {
    pub fn design(spec: &FilterSpec, sample_rate: f64) -> Result<Self> {
        spec.validate(sample_rate)?;
        let n = spec.order;
        let ratio = spec.cutoff / sample_rate;
        if ratio >= 0.5 {
            return Err(SimError::Numerical("cutoff at or above Nyquist".into()));
        }
        let fs2 = 2.0 * sample_rate;
        let wc = fs2 * (PI * ratio).tan();
        let bilinear = |s: C64| (fs2 + s) / (fs2 - s);
        let mut sections = Vec::new();
        for k in 0..n / 2 {
            let s = C64::from_polar(wc, PI * (2 * k + n + 1) as f64 / (2 * n) as f64);
            let z = bilinear(s);
            let (a1, a2) = (-2.0 * z.re, z.norm_sqr());
            let g = (1.0 + a1 + a2) / 4.0;
            sections.push([g, 2.0 * g, g, a1, a2]);
        }
        if n % 2 == 1 {
            let z = bilinear(C64::new(-wc, 0.0)).re;
            let g = (1.0 - z) / 2.0;
            sections.push([g, g, 0.0, -z, 0.0]);
        }
        for s in &sections {
            // poles of 1 + a1 z⁻¹ + a2 z⁻² inside the unit circle
            if s[4].abs() >= 1.0 || s[3].abs() >= 1.0 + s[4] {
                return Err(SimError::Numerical("unstable filter discretization".into()));
            }
        }
        Ok(Butterworth { sections, sample_rate })
    }

    /// `|H(e^{i2πf/fs})|`.
    pub fn magnitude(&self, f: f64) -> f64 {
        let z1 = C64::from_polar(1.0, -2.0 * PI * f / self.sample_rate);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| ((s[0] + s[1] * z1 + s[2] * z2) / (1.0 + s[3] * z1 + s[4] * z2)).norm())
            .product()
    }

    /// Causal forward filtering from rest.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut w1, mut w2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let xin = *v;
                let out = s[0] * xin + w1;
                w1 = s[1] * xin - s[3] * out + w2;
                w2 = s[2] * xin - s[4] * out;
                *v = out;
            }
        }
        y
    }
}

pub fn apply_filter(signal: &[f64], filter: &FilterSpec, sample_rate: f64) -> Result<Vec<f64>> {
    Ok(Butterworth::design(filter, sample_rate)?.apply(signal))
}

/// Relative level below which a filtered tail counts as finished.
pub const TAIL_THRESHOLD: f64 = 1e-4;

/// Sampled control: target exchange and the tunnel coupling realizing it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlWaveform {
    #[serde(rename = "t_ns")]
    pub times: Vec<f64>,
    /// Exchange that `t23` produces under the chosen exchange map (GHz).
    #[serde(rename = "J_e_GHz")]
    pub j_e: Vec<f64>,
    #[serde(rename = "t_T23_GHz")]
    pub t23: Vec<f64>,
    /// Time after which the control is off (ns); past `t_g` for filtered pulses.
    #[serde(rename = "end_ns")]
    pub end: f64,
}

impl ControlWaveform {
    pub fn waveform(&self) -> Result<Waveform> {
        Waveform::new(self.times.clone(), self.t23.clone())
    }

    pub fn peak_t23(&self) -> f64 {
        self.t23.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn build_control(spec: &PulseSpec, map: &ExchangeMap) -> Result<ControlWaveform> {
    spec.validate()?;
    let n = (spec.t_g * spec.sample_rate - 1e-9).ceil().max(1.0) as usize;
    let dt = spec.t_g / n as f64;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    let targets: Vec<f64> = times.iter().map(|&t| spec.exchange(t)).collect();
    let mut t23 = invert_exchange_to_tunnel(&targets, map)?;
    let mut end = spec.t_g;
    if let Some(f) = &spec.filter {
        let bw = Butterworth::design(f, 1.0 / dt)?;
        // the held input ends at t_g; samples past it are zero
        let hold = (f.cutoff * n as f64 * dt).ceil() as usize;
        let settle = ((1.0 / f.cutoff) / dt).ceil() as usize;
        let mut input: Vec<f64> = t23[..n].to_vec();
        let mut y;
        let mut extra = settle.max(hold);
        loop {
            input.resize(n + extra, 0.0);
            y = bw.apply(&input);
            let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let last = y.iter().rposition(|v| v.abs() > TAIL_THRESHOLD * peak).unwrap_or(0);
            if last + settle < y.len() {
                y.truncate(last + 2);
                break;
            }
            if extra > 1_000_000 {
                return Err(SimError::Numerical("filtered tail does not decay".into()));
            }
            extra *= 2;
        }
        times = (0..y.len()).map(|k| k as f64 * dt).collect();
        end = *times.last().unwrap();
        t23 = y;
    }
    let j_e = t23.iter().map(|&v| map.exchange(v)).collect::<Result<Vec<_>>>()?;
    Ok(ControlWaveform { times, j_e, t23, end })
}
