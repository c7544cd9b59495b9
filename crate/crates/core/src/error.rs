use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid axis set: {0}")]
    InvalidAxes(String),

    #[error("point {point:?} lies outside the grid box")]
    OutOfDomain { point: Vec<f64> },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("field is not normalized: integral of phi^2 = {mass}")]
    Normalization { mass: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid radial profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid exponents: p = {p} must be smaller than k = {k}")]
    InvalidExponent { p: f64, k: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("resolution error: {message}; suggested points per axis: {suggested}")]
    Resolution { message: String, suggested: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("simulation unstable: {discarded} of {total} paths discarded; reduce dt")]
    Instability { discarded: usize, total: usize },

    #[error("empty sample set")]
    EmptySample,

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping pipeline stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
