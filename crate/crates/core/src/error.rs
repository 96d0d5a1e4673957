use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A Taylor tail did not reach its tolerance before the term cap.
    #[error("series did not converge after {terms} terms (last term {last_term:e}, partial sum {partial_sum:e})")]
    NonConvergence {
        terms: usize,
        last_term: f64,
        partial_sum: f64,
    },

    #[error("word length {requested} exceeds the configured maximum depth {max_depth}")]
    DepthExceeded { requested: usize, max_depth: usize },

    #[error("UDD order {0} has irrational pulse times; use the extended-precision backend")]
    NotRational(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
