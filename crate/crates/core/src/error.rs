use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no admissible amplitude: {0}")]
    NoRoot(String),

    #[error("{what} did not converge after {iterations} iterations ({detail})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("t = {t} outside the interpolable range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("integration accuracy failure: {0}")]
    Accuracy(String),

    #[error("no exponential regime: {0}")]
    NoExponentialRegime(String),

    #[error("series too short: {0}")]
    InsufficientLength(String),

    #[error("trivial root: {0}")]
    TrivialRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
