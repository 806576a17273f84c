use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value {value} encountered at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("invalid interval [{a}, {b}]: lower bound must be strictly below upper bound")]
    InvalidInterval { a: f64, b: f64 },

    #[error("objective is non-finite at every vertex of the initial simplex")]
    OptimizerInit,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("density `{density}` is negative ({value}) at x = {x}")]
    NegativeDensity { density: &'static str, x: f64, value: f64 },

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("datum {value} at index {index} lies outside [0, 1]")]
    OutOfUnitInterval { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("data have zero range; cannot build a support transform")]
    DegenerateData,

    #[error("curvature matrix is singular (smallest singular value {smallest_singular_value:e})")]
    SingularCurvature { smallest_singular_value: f64 },

    #[error("minimum Hellinger optimization did not converge (h = {h_min}, theta = {theta:?})")]
    NotConverged { theta: Vec<f64>, h_min: f64 },

    #[error("{failed} of {total} refits failed, above the allowed fraction {allowed}")]
    TooManyFailures { failed: usize, total: usize, allowed: f64 },

    #[error("failed to parse line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
