use thiserror::Error;

/// Errors raised by the estimation, calibration and diagnostics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular local design at scale {scale}: {reason}")]
    SingularDesign { scale: usize, reason: String },

    #[error("scale indices must satisfy l < m (got l = {l}, m = {m})")]
    ScaleOrder { l: usize, m: usize },

    #[error("component index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("mu must lie in (0, 1/4), got {0}")]
    InvalidMu(f64),

    #[error("growth factor u must exceed 1, got {0}")]
    InvalidU(f64),

    #[error("misspecification level delta must lie in [0, 1), got {0}")]
    DeltaOutOfRange(f64),

    #[error("joint covariance matrix is not positive definite (k = {k})")]
    SingularJointCovariance { k: usize },

    #[error("weights are not nested boxcar indicators: {0}")]
    NotBoxcar(String),

    #[error("no feasible scale: {0}")]
    NoFeasibleScale(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("experiment failed: {0}")]
    ExperimentFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
