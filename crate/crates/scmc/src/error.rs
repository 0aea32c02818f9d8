use crate::qstate::DensityMatrix;
use thiserror::Error;

/// Everything that can go wrong across state construction, sampler
/// configuration, and pipeline runs.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix, vector, or probability list failed a structural check.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operator or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A covariance matrix is not Hermitian positive-definite.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// A scalar parameter is outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A probability-operator measurement failed validation, or cannot
    /// represent the requested probabilities.
    #[error("invalid POM: {0}")]
    InvalidPom(String),

    /// A sample handed to an estimator violates that estimator's premises.
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// Every particle weight collapsed to zero during normalization.
    #[error("degenerate weights: every particle has zero weight")]
    DegenerateWeights,

    /// A full run aborted because the ensemble degenerated; carries the
    /// per-step effective-sample-size trace up to the failing step.
    #[error("ensemble degenerated at bridge step {step}; ESS trace {ess_trace:?}")]
    DegenerateEnsemble { step: usize, ess_trace: Vec<f64> },

    /// Peak search hit its iteration cap; carries the best iterate found.
    #[error("peak search did not converge after {iterations} iterations (best log density {best_log_f})")]
    PeakNotConverged {
        iterations: usize,
        best_log_f: f64,
        best: Box<DensityMatrix>,
    },

    /// The size integrand 1/(λ g_λ) lost positivity at a grid point.
    #[error("size integrand not positive at lambda = {lambda:e}")]
    SingularIntegrand { lambda: f64 },

    /// Anchor calibration found too few reference points inside the anchor
    /// region; rerun with a larger anchor λ or a larger calibration sample.
    #[error("anchor too deep: {0}")]
    AnchorTooDeep(String),

    /// A run-configuration document failed schema validation.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: 2 for configuration
    /// problems, 3 for degenerate-ensemble aborts, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidInput(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidCovariance(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidPom(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::DegenerateWeights
            | Error::DegenerateEnsemble { .. }
            | Error::AnchorTooDeep(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
