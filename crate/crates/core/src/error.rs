use thiserror::Error;

#[derive(Debug, Error)]
pub enum FoctlError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("step {index} is outside the propagator horizon {horizon}")]
    OutOfRange { index: usize, horizon: usize },

    #[error("singular or ill-conditioned system in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    #[error("iterative solver stopped after {iterations} iterations with relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("parameters not identifiable: {unknowns} unknowns but design rank {rank} (null-space dimension {nullity})")]
    Identifiability {
        unknowns: usize,
        rank: usize,
        nullity: usize,
    },

    #[error("invalid cost matrices: {0}")]
    InvalidCost(String),

    #[error("unknown noise family `{0}`")]
    UnknownNoise(String),

    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed interchange data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FoctlError {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        FoctlError::Dimension {
            what,
            expected,
            got,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        FoctlError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            FoctlError::Domain(_) => "domain",
            FoctlError::Dimension { .. } => "dimension",
            FoctlError::OutOfRange { .. } => "out_of_range",
            FoctlError::Singular { .. } => "singular",
            FoctlError::NotConverged { .. } => "not_converged",
            FoctlError::Identifiability { .. } => "identifiability",
            FoctlError::InvalidCost(_) => "invalid_cost",
            FoctlError::UnknownNoise(_) => "unknown_noise",
            FoctlError::Config { .. } => "config",
            FoctlError::Format(_) => "format",
            FoctlError::Io(_) => "io",
            FoctlError::Json(_) => "json",
            FoctlError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, FoctlError>;
