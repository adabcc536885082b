use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported symmetry: J={j}")]
    UnsupportedSymmetry { j: u32 },
    #[error("derivation bug: {0}")]
    Derivation(String),
    #[error("invalid exchange sector: {0}")]
    InvalidSector(String),
    #[error("invalid truncation: N={n}, N_x={nx}")]
    InvalidTruncation { n: usize, nx: usize },
    #[error("invalid basis state ({0}, {1}, {2}) for the antisymmetric sector")]
    InvalidState(usize, usize, usize),
    #[error("non-banded operator requested: {0}")]
    NonBanded(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error(
        "factorization breakdown at pivot {pivot} (shift {shift:e}); retry with a perturbed shift"
    )]
    Breakdown { pivot: usize, shift: f64 },
    #[error("matrix not positive definite at pivot {0}")]
    NotPositiveDefinite(usize),
    #[error("insufficient convergence: {0}")]
    InsufficientConvergence(String),
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },
    #[error("reference data error at row {row}: {message}")]
    Reference { row: usize, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
