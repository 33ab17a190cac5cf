use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{which} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { which: String, asymmetry: f64 },

    #[error("{which} is not positive definite: eigenvalue {eigenvalue:.6e}")]
    NotPositiveDefinite { which: String, eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} = {value} outside {range}")]
    OutOfRange {
        what: String,
        value: f64,
        range: String,
    },

    #[error("degenerate form: {0}")]
    Degenerate(String),

    #[error("quadrature failure: {what} (residual {residual:.3e})")]
    Quadrature { what: String, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("path too rough at resolution: cell [{start}, {end}] certifies {value:.4e} >= eps {eps}")]
    PathTooRough {
        start: f64,
        end: f64,
        value: f64,
        eps: f64,
    },

    #[error("solver rejects: {0}")]
    SolverRejected(String),

    #[error("no convergence after {iterations} iterations (last increment {increment:.3e})")]
    MaxIterations { iterations: usize, increment: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn range(what: &str, value: f64, range: &str) -> Self {
        Error::OutOfRange {
            what: what.to_string(),
            value,
            range: range.to_string(),
        }
    }
}
