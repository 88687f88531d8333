use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coefficient field: {0}")]
    InvalidField(String),

    #[error("ellipticity certificate failed: lower bound {lower:.6e}, upper bound {upper:.6e}, claimed mu {mu:.6e}")]
    NotElliptic { lower: f64, upper: f64, mu: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("component mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("grid spacing {h:.4e} does not resolve the field (need h <= {required:.4e})")]
    UnderResolved { h: f64, required: f64 },

    #[error("periodic box side {side} is smaller than the required {required}")]
    BoxTooSmall { side: f64, required: f64 },

    #[error("zeroth-order coefficient must be non-negative, got {0}")]
    NegativeLambda(f64),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("incommensurate grids: {0}")]
    Incommensurate(String),

    #[error("sampling does not cover the requested range: {0}")]
    CoverageGap(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
