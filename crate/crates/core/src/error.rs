use thiserror::Error;

/// Errors raised by mesh construction, the discrete operators and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("field shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-positive density {value:e} in cell {cell}")]
    NonPositiveDensity { cell: usize, value: f64 },

    #[error("non-positive face coefficient {value:e} on axis {axis}, face {face}")]
    NonPositiveCoefficient { axis: usize, face: usize, value: f64 },

    #[error("invalid boundary specification: {0}")]
    Boundary(String),

    #[error("elliptic precondition violated: {0}")]
    Precondition(String),

    #[error("linear solver failed: {0}")]
    LinearSolve(String),

    #[error("nonlinear solver failed after {iterations} iterations (last residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("time step underflow: dt = {dt:e}")]
    TimeStepUnderflow { dt: f64 },

    #[error("unknown case '{0}'")]
    UnknownCase(String),

    #[error("no root bracket found: {0}")]
    NoBracket(String),

    #[error("no crossing found: {0}")]
    NoCrossing(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
