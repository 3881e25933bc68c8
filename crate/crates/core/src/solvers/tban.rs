use std::time::Instant;

use num_complex::Complex;

use crate::block::{BlockSystem, BlockVector};
use crate::error::{Error, Result};
use crate::precond::{apply_d_shift, pack, solve_d_stage, unpack, ShiftedToeplitzSolver, DENSE_LIMIT};
use crate::scalar::Real;

use super::{SolveReport, SolveStatus};

/// `σ(ω) = sqrt(((ω−1)² + λ²) / ((ω+1)² + λ²))`.
pub fn sigma_bound(omega: f64, lambda_max: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must be positive, got {omega}"),
        });
    }
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lambda_max",
            reason: format!("must be nonnegative, got {lambda_max}"),
        });
    }
    let l2 = lambda_max * lambda_max;
    Ok((((omega - 1.0).powi(2) + l2) / ((omega + 1.0).powi(2) + l2)).sqrt())
}

/// Minimiser `ω* = sqrt(λ² + 1)` of [`sigma_bound`].
pub fn omega_star(lambda_max: f64) -> f64 {
    (lambda_max * lambda_max + 1.0).sqrt()
}

/// `σ(ω*) = λ / (1 + ω*)`.
pub fn sigma_at_optimum(lambda_max: f64) -> f64 {
    lambda_max / (1.0 + omega_star(lambda_max))
}

/// How the `(ωI + 𝒯)` half step is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfStepPolicy {
    /// Dense Cholesky up to the dense limit, CG beyond.
    Auto,
    Dense,
    /// CG with tolerance `factor × outer tolerance`.
    Cg { factor: f64 },
}

#[derive(Debug, Clone)]
pub struct TbanOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub omega: f64,
    pub half_step: HalfStepPolicy,
    pub record_history: bool,
}

impl Default for TbanOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            omega: 1.0,
            half_step: HalfStepPolicy::Auto,
            record_history: true,
        }
    }
}

const CG_FACTOR: f64 = 1e-2;

fn half_step_solver<T: Real>(sys: &BlockSystem<T>, opts: &TbanOptions) -> Result<(ShiftedToeplitzSolver<T>, Option<f64>)> {
    let omega = T::of(opts.omega);
    let t = sys.toeplitz().clone();
    let cg = |factor: f64| -> Result<(ShiftedToeplitzSolver<T>, Option<f64>)> {
        let tol = factor * opts.tol;
        Ok((ShiftedToeplitzSolver::cg(omega, t.clone(), T::of(tol), 10 * sys.dim() + 100)?, Some(tol)))
    };
    match opts.half_step {
        HalfStepPolicy::Dense => Ok((ShiftedToeplitzSolver::dense(omega, t)?, None)),
        HalfStepPolicy::Cg { factor } => cg(factor),
        HalfStepPolicy::Auto if sys.dim() <= DENSE_LIMIT => {
            Ok((ShiftedToeplitzSolver::dense(omega, t)?, None))
        }
        HalfStepPolicy::Auto => cg(CG_FACTOR),
    }
}

/// One TBAN sweep on packed vectors:
/// `(ωI + 𝒯) x½ = (ωI − 𝒟) x + f`, `(ωI + 𝒟) x' = (ωI − 𝒯) x½ + f`.
fn sweep<T: Real>(
    sys: &BlockSystem<T>,
    solver: &ShiftedToeplitzSolver<T>,
    omega: T,
    x: &mut [Complex<T>],
    f: &[Complex<T>],
) -> Result<usize> {
    let d = sys.diagonal().entries();
    // (ωI − 𝒟) in packed form is multiplication by (ω − 1 − iD)
    for ((v, fi), &di) in x.iter_mut().zip(f).zip(d) {
        *v = *v * Complex::new(omega - T::one(), -di) + *fi;
    }
    let inner = solver.solve(x)?;
    // (ωI − 𝒯) in packed form is ω + iT
    let mut tx = x.to_vec();
    sys.toeplitz().apply_in_place(&mut tx);
    for ((v, tv), fi) in x.iter_mut().zip(tx).zip(f) {
        *v = *v * omega + crate::scalar::mul_i(tv) + *fi;
    }
    solve_d_stage(x, omega, sys.diagonal());
    Ok(inner)
}

/// Stationary TBAN iteration from the zero vector.
pub fn tban_solve<T: Real>(sys: &BlockSystem<T>, opts: &TbanOptions) -> Result<(BlockVector<T>, SolveReport)> {
    if !(opts.tol > 0.0) || opts.max_iter < 1 {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "tolerance must be positive and max_iter at least 1".into(),
        });
    }
    let start = Instant::now();
    let (solver, inner_tol) = half_step_solver(sys, opts)?;
    let omega = T::of(opts.omega);
    let f = pack(sys.rhs());
    let mut x = vec![Complex::<T>::default(); sys.dim()];
    let mut history = vec![1.0];
    let mut best = f64::INFINITY;
    let mut inner_total = 0;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut relres = if sys.rhs().norm() == T::zero() { 0.0 } else { 1.0 };
    if relres <= opts.tol {
        status = SolveStatus::Converged;
    } else {
        for k in 1..=opts.max_iter {
            inner_total += sweep(sys, &solver, omega, &mut x, &f)?;
            iterations = k;
            relres = sys.relative_residual(&unpack(&x))?.to_f64_lossy();
            if opts.record_history {
                history.push(relres);
            }
            if relres <= opts.tol {
                status = SolveStatus::Converged;
                break;
            }
            if relres > 10.0 * best {
                return Err(Error::SolverFailure(format!(
                    "TBAN residual grew from {best:e} to {relres:e}"
                )));
            }
            best = best.min(relres);
        }
    }
    Ok((
        unpack(&x),
        SolveReport {
            iterations,
            residuals: history,
            wall_time: start.elapsed().as_secs_f64(),
            converged: status == SolveStatus::Converged,
            status,
            final_relres: relres,
            inner_iterations: inner_total,
            inner_tol,
        },
    ))
}

/// Asymptotic error contraction of TBAN at `opts.omega`, measured by power
/// iteration on the error propagator (the iteration with `f = 0`) in the norm
/// `‖(ωI + 𝒟) e‖`. Returns the geometric mean rate over the last `window`
/// of `steps` sweeps.
pub fn tban_contraction<T: Real>(sys: &BlockSystem<T>, opts: &TbanOptions, steps: usize, window: usize) -> Result<f64> {
    let window = window.clamp(1, steps.max(1));
    let (solver, _) = half_step_solver(sys, opts)?;
    let omega = T::of(opts.omega);
    let n = sys.dim();
    let zero = vec![Complex::<T>::default(); n];
    let mut e: Vec<Complex<T>> = (0..n)
        .map(|i| {
            let s = T::of(((i * 7919 + 13) % 101) as f64 / 101.0 - 0.5);
            Complex::new(s, T::of(0.3) - s * s)
        })
        .collect();
    let wnorm = |v: &[Complex<T>]| -> f64 {
        let mut w = v.to_vec();
        apply_d_shift(&mut w, omega, sys.diagonal());
        w.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt().to_f64_lossy()
    };
    let mut log_sum = 0.0;
    let mut prev = wnorm(&e);
    for k in 0..steps {
        sweep(sys, &solver, omega, &mut e, &zero)?;
        let cur = wnorm(&e);
        if cur == 0.0 {
            return Ok(0.0);
        }
        if k + window >= steps {
            log_sum += (cur / prev).ln();
        }
        let s = T::of(1.0 / cur);
        for v in e.iter_mut() {
            *v *= s;
        }
        prev = 1.0;
    }
    Ok((log_sum / window as f64).exp())
}
