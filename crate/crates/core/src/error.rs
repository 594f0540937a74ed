use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cdf: {0}")]
    InvalidCdf(String),
    #[error("invalid interval [{lo}, {hi}]: {reason}")]
    InvalidInterval { lo: f64, hi: f64, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("moment integral did not converge (estimated error {error:e})")]
    NonFiniteMoment { error: f64 },
    #[error("quadrature on [{lo}, {hi}] did not converge (estimated error {error:e})")]
    QuadratureFailure { lo: f64, hi: f64, error: f64 },
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),
    #[error("cholesky factorization failed with jitter {jitter:e}")]
    FactorizationFailure { jitter: f64 },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier used in structured diagnostics.
    pub fn id(&self) -> &'static str {
        match self {
            Error::InvalidCdf(_) => "invalid_cdf",
            Error::InvalidInterval { .. } => "invalid_interval",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFiniteMoment { .. } => "non_finite_moment",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::DivisionByZero(_) => "division_by_zero",
            Error::EmptyBatch => "empty_batch",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::OptimizerFailure(_) => "optimizer_failure",
            Error::FactorizationFailure { .. } => "factorization_failure",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidCdf(_)
                | Error::InvalidInterval { .. }
                | Error::InvalidArgument(_)
                | Error::UnknownPreset(_)
                | Error::Json(_)
        )
    }
}
