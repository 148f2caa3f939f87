use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (anti-Hermitian norm {anti_hermitian_norm:.3e})")]
    NotHermitian { anti_hermitian_norm: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("index {index} outside the admissible range {range}")]
    Index { index: usize, range: String },
    #[error("initial state is correlated (distance from product {0:.3e})")]
    Correlated(f64),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("branch {branch}: {source}")]
    Branch {
        branch: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
