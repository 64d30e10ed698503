use thiserror::Error;

/// Errors raised by grid construction, kernels, the HF model and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("kernel under-resolved: t = {t} is below 2h = {limit}")]
    UnderResolved { t: f64, limit: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("ill-conditioned basis: condition number {0:.3e}")]
    IllConditioned(f64),
    #[error("missing expansion order {0}")]
    MissingOrder(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
