use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by the library and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point t = {0} lies outside [-1, 1]")]
    OutOfDomain(f64),

    #[error("non-finite value {value} at t = {t}")]
    NonFinite { t: f64, value: f64 },

    #[error("Newton iteration for root {index} of P_{size} did not converge in {steps} steps")]
    NoConvergence {
        size: usize,
        index: usize,
        steps: usize,
    },

    #[error("outside rate hypothesis: {0}")]
    OutsideHypothesis(String),

    #[error("nothing to fit: {0}")]
    DegenerateFit(String),

    #[error("at delta = {delta:e}: {source}")]
    AtDelta {
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_delta(delta: f64, source: Error) -> Self {
        Error::AtDelta {
            delta,
            source: Box::new(source),
        }
    }

    /// True for failures of the numerics themselves (as opposed to bad input
    /// or configuration).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::NoConvergence { .. } | Error::DegenerateFit(_) => true,
            Error::AtDelta { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
