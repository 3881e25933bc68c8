use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fractional order {0} outside (1, 2]")]
    InvalidOrder(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("dense path refused: dimension {n} exceeds limit {limit}")]
    SizeGuard { n: usize, limit: usize },

    #[error("Krylov basis needs {needed} bytes, budget is {budget}")]
    MemoryGuard { needed: usize, budget: usize },

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("spectral bracket violated: {0}")]
    BracketViolation(String),

    #[error("imaginary residue {residue:e} exceeds {limit:e}")]
    ImaginaryResidue { residue: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
