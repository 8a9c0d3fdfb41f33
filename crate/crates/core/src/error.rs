use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Degenerate,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("curves are discretized on incompatible grids")]
    GridMismatch,
    #[error("basis must contain at least one element")]
    EmptyBasis,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bandwidth must be strictly positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("direction is not a unit vector (norm {0})")]
    NotUnitNorm(f64),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate sample: variance estimate is {0}")]
    DegenerateVariance(f64),
    #[error("eigenvalue {index} is {value}, truncation requires strictly positive eigenvalues")]
    NonPositiveEigenvalue { index: usize, value: f64 },
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("{failed} of {total} bootstrap replicates failed, more than the allowed 5%")]
    TooManyFailures { failed: usize, total: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::NonPositiveBandwidth(_)
            | Error::NotUnitNorm(_)
            | Error::EmptyBasis
            | Error::NonPositiveEigenvalue { .. } => ErrorKind::Config,
            Error::DegenerateVariance(_) | Error::TooManyFailures { .. } => ErrorKind::Degenerate,
            Error::InvalidGrid(_)
            | Error::GridMismatch
            | Error::TooFewObservations { .. }
            | Error::LengthMismatch { .. }
            | Error::RankDeficient { .. }
            | Error::Parse { .. }
            | Error::Io { .. } => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
