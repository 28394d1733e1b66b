use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// A positive-definite factorization or eigen-solve hit a (near) zero
    /// pivot. `dim` is the offending coordinate.
    #[error("matrix is numerically singular at dimension {dim} (pivot {pivot:e})")]
    Singular { dim: usize, pivot: f64 },

    #[error("behavior policy never plays action {0}: coverage is infinite")]
    InfiniteCoverage(usize),

    #[error("state representation does not match the feature map: {0}")]
    RepresentationMismatch(&'static str),

    #[error("realizability check failed: residual {0:e}")]
    Realizability(f64),

    #[error("model classes are not nested")]
    NotNested,

    #[error("ground truth unavailable: {0}")]
    GroundTruthUnavailable(&'static str),

    #[error("population second-moment matrix is singular (relative eigenvalue {0:e})")]
    IllPosedPopulation(f64),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures that originate in the linear algebra layer.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::IllPosedPopulation(_) | Error::Realizability(_)
        )
    }
}
