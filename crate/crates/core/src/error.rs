use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid safety specification: {0}")]
    InvalidSpec(String),
    #[error("constraint row {row} is degenerate: an offset bound sums to zero")]
    DegenerateRow { row: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("LMIs infeasible: no strictly feasible point after {iterations} iterations")]
    Infeasible { iterations: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
    #[error("plant integration produced a non-finite state")]
    NonFiniteState,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("sampling region is empty")]
    EmptyRegion,
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("non-finite {which} loss at update {update}")]
    NonFiniteLoss { which: &'static str, update: u64 },
    #[error("insufficient data: {found} transitions, at least {required} required")]
    InsufficientData { found: usize, required: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
