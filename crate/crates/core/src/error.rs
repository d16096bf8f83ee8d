use thiserror::Error;

/// Error type shared by every module in this crate.
///
/// Variants are grouped by what the caller can do about them: domain and
/// shape errors mean the inputs were rejected up front, degenerate and
/// numeric errors mean a particular sample or solve could not be completed,
/// and `Unsupported` means the requested operation does not exist for the
/// chosen model family.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parameter outside domain: {0}")]
    ParameterDomain(String),

    #[error("data shape invalid: {0}")]
    DataShape(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("bracketing failure: {0}")]
    Bracketing(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("information matrix not positive definite: {0}")]
    SingularInformation(String),

    #[error("experiment integrity: {0}")]
    ExperimentIntegrity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
