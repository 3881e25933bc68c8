use std::time::Instant;

use crate::error::{check_len, Error, Result};
use crate::scalar::{axpy, dot, norm2, scale, Real};

use super::{true_relres, LinearOperator, SolveOptions, SolveReport, SolveStatus};

/// Full GMRES from the zero initial guess, right-preconditioned by `m_inv`.
///
/// Arnoldi uses modified Gram–Schmidt and the least-squares problem is kept
/// triangular with Givens rotations. With right preconditioning the rotated
/// residual estimate is the residual of the original system, so it is the
/// stopping quantity; the report also carries an independent recomputation.
///
/// The Krylov basis grows one vector per step; a step that would take it past
/// `opts.memory_budget` bytes fails with [`Error::MemoryGuard`].
pub fn gmres<T: Real>(
    a: &dyn LinearOperator<T>,
    m_inv: Option<&dyn LinearOperator<T>>,
    f: &[T],
    opts: &SolveOptions,
) -> Result<(Vec<T>, SolveReport)> {
    opts.validate()?;
    let n = a.dim();
    check_len(n, f.len())?;
    if let Some(m) = m_inv {
        check_len(n, m.dim())?;
    }
    let vec_bytes = n.saturating_mul(std::mem::size_of::<T>());
    let guard = |vectors: usize| -> Result<()> {
        let needed = vectors.saturating_mul(vec_bytes);
        if needed > opts.memory_budget {
            Err(Error::MemoryGuard {
                needed,
                budget: opts.memory_budget,
            })
        } else {
            Ok(())
        }
    };
    guard(1)?;

    let start = Instant::now();
    let beta = norm2(f);
    let mut history = vec![1.0];
    if beta == T::zero() {
        return Ok((
            vec![T::zero(); n],
            SolveReport {
                iterations: 0,
                residuals: history,
                wall_time: start.elapsed().as_secs_f64(),
                converged: true,
                status: SolveStatus::Converged,
                final_relres: 0.0,
                inner_iterations: 0,
                inner_tol: None,
            },
        ));
    }

    let tol = T::of(opts.tol);
    let max_steps = opts.max_iter.min(n);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(max_steps.min(256) + 1);
    let mut v0 = f.to_vec();
    scale(&mut v0, T::one() / beta);
    basis.push(v0);

    // columns of the rotated Hessenberg matrix
    let mut h: Vec<Vec<T>> = Vec::new();
    let mut cs: Vec<T> = Vec::new();
    let mut sn: Vec<T> = Vec::new();
    let mut g = vec![beta];
    let mut z = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut status = SolveStatus::MaxIter;
    let mut steps = 0;

    for j in 0..max_steps {
        let vj = &basis[j];
        match m_inv {
            Some(m) => {
                m.apply(vj, &mut z);
                a.apply(&z, &mut w);
            }
            None => a.apply(vj, &mut w),
        }
        let w_norm0 = norm2(&w);
        let mut col = Vec::with_capacity(j + 2);
        for v in basis.iter() {
            let hij = dot(&w, v);
            axpy(&mut w, -hij, v);
            col.push(hij);
        }
        let hnext = norm2(&w);
        col.push(hnext);

        for i in 0..j {
            let (a0, a1) = (col[i], col[i + 1]);
            col[i] = cs[i] * a0 + sn[i] * a1;
            col[i + 1] = -sn[i] * a0 + cs[i] * a1;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = T::zero();
        cs.push(c);
        sn.push(s);
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        steps = j + 1;

        let est = g[j + 1].abs() / beta;
        if opts.record_history {
            history.push(est.to_f64_lossy());
        }
        if est <= tol {
            status = SolveStatus::Converged;
            break;
        }
        if hnext <= T::epsilon() * w_norm0.max(T::min_positive_value()) {
            status = SolveStatus::Breakdown;
            break;
        }
        if j + 1 < max_steps {
            guard(basis.len() + 1)?;
            let mut next = w.clone();
            scale(&mut next, T::one() / hnext);
            basis.push(next);
        }
    }

    // back substitution for the least-squares coefficients
    let k = steps;
    let mut yk = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in i + 1..k {
            s -= h[l][i] * yk[l];
        }
        yk[i] = s / h[i][i];
    }
    let mut u = vec![T::zero(); n];
    for (coef, v) in yk.iter().zip(&basis) {
        axpy(&mut u, *coef, v);
    }
    let x = match m_inv {
        Some(m) => {
            let mut x = vec![T::zero(); n];
            m.apply(&u, &mut x);
            x
        }
        None => u,
    };
    let final_relres = true_relres(a, &x, f);
    if status == SolveStatus::Breakdown && final_relres <= opts.tol {
        status = SolveStatus::Converged;
    }
    if !opts.record_history {
        history.push((g[k].abs() / beta).to_f64_lossy());
    }
    Ok((
        x,
        SolveReport {
            iterations: k,
            residuals: history,
            wall_time: start.elapsed().as_secs_f64(),
            converged: status == SolveStatus::Converged,
            status,
            final_relres,
            inner_iterations: 0,
            inner_tol: None,
        },
    ))
}

fn givens<T: Real>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}
