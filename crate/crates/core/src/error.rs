use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("charge localization violated: {0}")]
    LocalizationViolated(String),

    #[error("effective model denominator `{term}` too small ({value:.3e} GHz)")]
    SmallDenominator { term: String, value: f64 },

    #[error("logical subspace is ambiguous: {0}")]
    DegenerateSubspace(String),

    #[error("time step {dt_ns} ns too coarse; need dt <= {required_ns:.4e} ns")]
    TimeStepTooCoarse { dt_ns: f64, required_ns: f64 },

    #[error("waveform undefined at t = {0} ns")]
    WaveformUndefined(f64),

    #[error("exchange target {target:.4e} GHz outside attainable range [{lo:.4e}, {hi:.4e}] GHz")]
    ExchangeOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("exchange vs tunnel map is not monotone near t_T23 = {0} GHz")]
    NonMonotoneMap(f64),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn param(name: &str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SimError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
