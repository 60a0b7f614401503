use thiserror::Error;

/// Errors raised by the factorizations, Krylov solvers and host algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("columns are not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
