use thiserror::Error;

/// Errors raised while validating, factorizing or iterating on a conic program.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cone specification is empty or has an invalid block: {0}")]
    EmptyCone(String),

    #[error("non-finite entry in {what} at index {index}")]
    NonFiniteEntry { what: &'static str, index: usize },

    #[error("matrix is rank deficient: numerical rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("iterate became non-finite at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("iterates diverged at iteration {iter} (norm {norm:e})")]
    Diverged { iter: usize, norm: f64 },

    #[error("cone size {h} does not divide dimension {n}")]
    IndivisibleConeSize { n: usize, h: usize },

    #[error("matrix has an all-zero {kind} at index {index}")]
    ZeroRowOrColumn { kind: &'static str, index: usize },

    #[error("invalid option: {0}")]
    InvalidOptions(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;
