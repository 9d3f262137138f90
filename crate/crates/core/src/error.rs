use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("sample count mismatch: geometry holds {expected} samples, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("fields live on different geometries")]
    GeometryMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("invalid solver configuration: {0}")]
    SolverConfig(String),

    /// Non-finite samples or a conservation law broken beyond its threshold.
    #[error("numeric abort at t = {time}: {reason}")]
    NumericAbort { time: f64, reason: String },

    #[error("observation: {0}")]
    Observe(String),

    #[error("rate fit: {0}")]
    Fit(String),
}
