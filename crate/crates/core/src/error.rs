use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument violates its documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate grid: {rows}x{cols} (need at least {min}x{min})")]
    DegenerateGrid { rows: usize, cols: usize, min: usize },

    #[error("empty level set at level {0}")]
    EmptyLevelSet(f64),

    /// Input carries no usable geometry or variance (all-equal cells, flat gradients...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("point ({x}, {y}) lies outside the window")]
    OutsideWindow { x: f64, y: f64 },

    /// An estimator declines to answer because its normalisation is singular.
    #[error("estimator refused: {0}")]
    Refused(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
