use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("isolated vertex {0}")]
    IsolatedVertex(usize),

    #[error("zero-area face {face} ({a}, {b}, {c})")]
    DegenerateFace {
        face: usize,
        a: usize,
        b: usize,
        c: usize,
    },

    #[error("connectivity mismatch: {0}")]
    ConnectivityMismatch(String),

    #[error("degenerate one-ring at vertex {0}")]
    DegenerateRing(usize),

    #[error("numerically singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("mesh is disconnected: vertex {0} is unreachable from vertex 0")]
    Disconnected(usize),

    #[error("linear solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    SolveFailed { residual: f64, iterations: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("batch-norm training mode requires a batch of at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("non-finite gradient in parameter tensor {0}")]
    NonFiniteGradient(usize),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("condition error: {0}")]
    Condition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            message: message.into(),
        }
    }
}
