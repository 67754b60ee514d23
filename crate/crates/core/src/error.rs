use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("feature {feature} has no observed values")]
    NeverObserved { feature: String },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(String),

    #[error("affine map is rank deficient on the subspace (relative singular value {0:e})")]
    RankDeficient(f64),

    #[error("non-finite value in {factor}")]
    NonFinite { factor: &'static str },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("class {label} absent from {split}; stratification failed")]
    MissingClass { label: i8, split: String },

    #[error("log-likelihood decreased by {decrease:e} at iteration {iteration}")]
    LikelihoodDecrease { iteration: usize, decrease: f64 },

    #[error("missing result for configuration {0}")]
    MissingCell(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
