use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid model parameter: {0}")]
    Model(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("angle matrix is degenerate: det = {det:e} < {min:e} (angle nearly constant)")]
    DegeneratePi { det: f64, min: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("explicit step dt = {dt:e} exceeds the stability bound {bound:e}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("singular Jacobian in {0}")]
    SingularJacobian(&'static str),

    #[error("stored winding {stored} disagrees with recomputed winding {recomputed}")]
    WindingMismatch { stored: i64, recomputed: i64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient tail: {points} usable points, need at least {needed}")]
    InsufficientTail { points: usize, needed: usize },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
