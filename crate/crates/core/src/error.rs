use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Parse(String),

    #[error("invalid model: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// No window of at most `window` stages in the periodic block has a
    /// Dobrushin product below one.
    #[error("no contraction: every window of up to {window} periodic stages has ergodicity product 1 (condition prod Delta_n -> 0 fails)")]
    NoContraction { window: usize },

    #[error("K_n infinite: bounded kernel ratio condition (K_n < inf) fails at stage {stage}")]
    InfiniteRatio { stage: usize },

    #[error("no risk contraction at gamma = {gamma}: both the coupling bound and the measured tilted coefficient have period product >= 1")]
    NoRiskContraction { gamma: f64 },

    #[error("iteration budget of {kmax} stage applications exhausted; last span increment {achieved:e}")]
    KmaxExceeded { kmax: usize, achieved: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("at gamma = {gamma}: {source}")]
    AtGamma {
        gamma: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors the CLI reports with exit code 2: the input was
    /// readable but violates a model invariant or a solver assumption.
    pub fn is_assumption_failure(&self) -> bool {
        if let Error::AtGamma { source, .. } = self {
            return source.is_assumption_failure();
        }
        matches!(
            self,
            Error::Validation(_)
                | Error::Policy(_)
                | Error::NoContraction { .. }
                | Error::InfiniteRatio { .. }
                | Error::NoRiskContraction { .. }
                | Error::KmaxExceeded { .. }
        )
    }
}
