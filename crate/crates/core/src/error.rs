use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("enumeration cap exceeded: {what} = {value} > {cap}")]
    EnumerationCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("instance is not gauge-fixed (planted configuration is not all-ones)")]
    NotGaugeFixed,

    #[error("no convergence after {iters} iterations (last residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("finite-difference step {step:e} is dominated by Monte Carlo noise (se {se:e})")]
    NoiseDominated { step: f64, se: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
