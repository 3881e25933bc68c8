//! Krylov and stationary solvers for the real block system.

mod gmres;
mod tban;

pub use gmres::gmres;
pub use tban::{
    omega_star, sigma_at_optimum, sigma_bound, tban_contraction, tban_solve, HalfStepPolicy,
    TbanOptions,
};

use crate::block::BlockSystem;
use crate::scalar::Real;
use crate::structured::CirculantKind;

/// A square linear map on flat real vectors.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], out: &mut [T]);
}

/// The block matrix `R` acting on `[z; y]`.
impl<T: Real> LinearOperator<T> for BlockSystem<T> {
    fn dim(&self) -> usize {
        2 * BlockSystem::dim(self)
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        let n = BlockSystem::dim(self);
        let v = crate::block::BlockVector::from_flat(x);
        let r = self.apply_r(&v).expect("block length checked by caller");
        out[..n].copy_from_slice(&r.z);
        out[n..].copy_from_slice(&r.y);
    }
}

/// Identity map, the "no preconditioner" choice.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl<T: Real> LinearOperator<T> for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(x);
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    pub dim: usize,
    pub f: F,
}

impl<T, F: Fn(&[T], &mut [T])> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        (self.f)(x, out)
    }
}

/// Preconditioner selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecondKind {
    None,
    Tau,
    Circulant,
    Exact,
}

impl PrecondKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "gmres",
            Self::Tau => "tau-gmres",
            Self::Circulant => "c-gmres",
            Self::Exact => "f-gmres",
        }
    }
}

impl std::str::FromStr for PrecondKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "tau" => Ok(Self::Tau),
            "circulant" => Ok(Self::Circulant),
            "exact" => Ok(Self::Exact),
            other => Err(format!("unknown preconditioner `{other}` (none|tau|circulant|exact)")),
        }
    }
}

/// Default Krylov basis budget in bytes.
pub const DEFAULT_MEMORY_BUDGET: usize = 3 << 30;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub omega: f64,
    pub precond: PrecondKind,
    pub circulant: CirculantKind,
    pub record_history: bool,
    /// Bytes allowed for the Krylov basis; runs needing more are refused.
    pub memory_budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            omega: 1.0,
            precond: PrecondKind::Tau,
            circulant: CirculantKind::Optimal,
            record_history: true,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |name, reason: &str| {
            Err(crate::Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.tol > 0.0) {
            return bad("tol", "must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter", "must be at least 1");
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return bad("omega", "must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    /// Invariant subspace reached without meeting the tolerance.
    Breakdown,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIter => "maxiter",
            Self::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual after each iteration, starting with `1` at step 0.
    pub residuals: Vec<f64>,
    pub wall_time: f64,
    pub converged: bool,
    pub status: SolveStatus,
    /// `‖f − A x‖ / ‖f‖` recomputed from the returned iterate.
    pub final_relres: f64,
    /// Total inner iterations of iterative half-step solves (TBAN only).
    pub inner_iterations: usize,
    pub inner_tol: Option<f64>,
}

pub(crate) fn true_relres<T: Real>(a: &dyn LinearOperator<T>, x: &[T], f: &[T]) -> f64 {
    let mut ax = vec![T::zero(); f.len()];
    a.apply(x, &mut ax);
    let mut r = T::zero();
    for (fi, ai) in f.iter().zip(&ax) {
        r += (*fi - *ai) * (*fi - *ai);
    }
    let nf = crate::scalar::norm2(f);
    let r = r.sqrt();
    (if nf > T::zero() { r / nf } else { r }).to_f64_lossy()
}

/// Solves `R x = f` with GMRES and the preconditioner named in `opts`.
pub fn solve_block<T: Real>(
    sys: &BlockSystem<T>,
    opts: &SolveOptions,
) -> crate::Result<(crate::block::BlockVector<T>, SolveReport)> {
    use crate::precond::{CirculantPreconditioner, ExactPreconditioner, TauPreconditioner};
    let omega = T::of(opts.omega);
    let d = sys.diagonal().clone();
    let f = sys.rhs().to_flat();
    let (x, rep) = match opts.precond {
        PrecondKind::None => gmres(sys, None, &f, opts)?,
        PrecondKind::Tau => {
            let p = TauPreconditioner::new(omega, sys.toeplitz().tau(), d)?;
            gmres(sys, Some(&p), &f, opts)?
        }
        PrecondKind::Circulant => {
            let p = CirculantPreconditioner::new(omega, sys.toeplitz().circulant(opts.circulant)?, d)?;
            gmres(sys, Some(&p), &f, opts)?
        }
        PrecondKind::Exact => {
            let p = ExactPreconditioner::new(omega, sys.toeplitz().clone(), d)?;
            gmres(sys, Some(&p), &f, opts)?
        }
    };
    Ok((crate::block::BlockVector::from_flat(&x), rep))
}
