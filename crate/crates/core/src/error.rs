use thiserror::Error;

use crate::gmres::RefineResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("triangular solve hit a zero diagonal at index {0}")]
    SingularDiagonal(usize),

    /// No-pivot factorization met a pivot below the configured floor, or a
    /// partial-pivot factorization met an all-zero column.
    #[error("singular pivot {value:e} at column {col}")]
    SingularPivot { col: usize, value: f64 },

    /// Refinement did not reach the target within the iteration cap. The
    /// partial result is kept so callers can report it.
    #[error("refinement did not converge in {} iterations", .0.iterations)]
    NotConverged(Box<RefineResult>),

    #[error("non-finite value in Krylov iteration {0}")]
    NumericalBreakdown(usize),

    #[error("backward error undefined: ||A||*||x|| + ||b|| == 0")]
    DegenerateSystem,

    #[error("row {0} is entirely zero")]
    ZeroRow(usize),

    #[error("column {0} is entirely zero")]
    ZeroColumn(usize),

    #[error("index ({i}, {j}) out of range for order {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot allocate {0} matrix elements")]
    AllocationFailure(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
