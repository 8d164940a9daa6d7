use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is singular or ill-conditioned (condition number {0:.3e})")]
    Singular(f64),

    /// An outcome has vanishing probability but non-vanishing derivative, so
    /// the Fisher information diverges at this parameter value.
    #[error("Fisher information is singular at outcome '{label}' (p = {probability:.3e}, |dp| = {gradient:.3e})")]
    SingularFisher {
        label: String,
        probability: f64,
        gradient: f64,
    },

    #[error("maximum-likelihood search did not converge ({reason}); best iterate {best:?}")]
    NonConvergence { reason: String, best: Vec<f64> },

    #[error("{failures} of {trials} trials failed to converge, above the 1% limit")]
    TooManyFailures { failures: u64, trials: u64 },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::NotHermitian(_) => "not_hermitian",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Singular(_) => "singular",
            Error::SingularFisher { .. } => "singular_fisher",
            Error::NonConvergence { .. } => "non_convergence",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
