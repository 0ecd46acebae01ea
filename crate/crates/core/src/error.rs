use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("axis {axis} out of range for a rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("linear algebra routine failed: {0}")]
    Linalg(String),

    #[error("eigensolver did not converge after {restarts} restarts (residual {residual:.3e})")]
    NoConvergence { restarts: usize, residual: f64 },

    #[error("measurement angle {0} is outside [0, pi/2]")]
    AngleOutOfRange(f64),

    #[error("{what} = {value} exceeds the cap of {cap}")]
    SizeCap { what: &'static str, value: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("post-selected outcome has zero probability")]
    ZeroProbability,

    #[error("state is injective (transfer spectrum not paired); no cat decomposition")]
    Injective,

    #[error("gauge search failed: {0}")]
    Gauge(String),

    #[error("critical point search failed: {reason}")]
    Critical { reason: String, probes: Vec<crate::solvers::Probe> },
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(e: ndarray::ShapeError) -> Self {
        Error::Shape(e.to_string())
    }
}
