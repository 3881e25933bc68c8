//! Problem presets and single-solve drivers for the benchmark tables.
//!
//! Every benchmark solves the system of the second time level: `u⁰` from the
//! initial condition, `u¹` from the bootstrap step, then `(D − T + iI) u² = b`.

use std::time::Instant;

use crate::block::BlockSystem;
use crate::error::{Error, Result};
use crate::scheme::{bootstrap_first_level, initial_condition, level_system, GridSpec};
use crate::solvers::{solve_block, PrecondKind, SolveOptions, SolveReport, SolveStatus};
use crate::stencil::FractionalOrder;

/// Final time of the one-dimensional tables (`N = 200` steps on `[−20, 20]`).
pub const TABLE_1D_T_END: f64 = 8.0;
pub const TABLE_1D_STEPS: usize = 200;

/// Time step of the two-dimensional tables on `[−5, 5]²`.
pub const TABLE_2D_DT: f64 = 0.05;

/// Tolerance of the bootstrap solves that produce `u¹`.
pub const BOOTSTRAP_TOL: f64 = 1e-12;

/// One linear-system benchmark: grid, fractional order and nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub grid: GridSpec,
    pub alpha: FractionalOrder,
    pub rho: f64,
}

impl Problem {
    pub fn new(grid: GridSpec, alpha: f64, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("must be nonnegative, got {rho}"),
            });
        }
        Ok(Self {
            grid,
            alpha: FractionalOrder::new(alpha)?,
            rho,
        })
    }

    /// `[−20, 20]`, `N = 200`, `t_end = 8`, `sech(x) e^{2ix}` data.
    pub fn table_1d(alpha: f64, rho: f64, m: usize) -> Result<Self> {
        Self::new(
            GridSpec::new(1, -20.0, 20.0, m, TABLE_1D_STEPS, TABLE_1D_T_END)?,
            alpha,
            rho,
        )
    }

    /// `[−5, 5]²` with `M` interior points per axis and `Δt = 1/20`.
    pub fn table_2d(alpha: f64, rho: f64, m: usize) -> Result<Self> {
        Self::new(GridSpec::with_dt(2, -5.0, 5.0, m, TABLE_2D_DT, 100)?, alpha, rho)
    }

    /// Square grid on `[−5, 5]²` whose system size matches `h` the way the
    /// tables count it: `M = 10/h` interior points per axis.
    pub fn table_2d_h(alpha: f64, rho: f64, h: f64) -> Result<Self> {
        Self::table_2d(alpha, rho, side_for_h(h)?)
    }

    /// `u⁰` through the bootstrap to the system for `u²`.
    pub fn second_level_system(&self) -> Result<BlockSystem<f64>> {
        let t = self.grid.toeplitz::<f64>(self.alpha)?;
        let u0 = initial_condition::<f64>(&self.grid)?;
        let opts = SolveOptions {
            tol: BOOTSTRAP_TOL,
            precond: PrecondKind::Tau,
            ..SolveOptions::default()
        };
        let (u1, _, _) = bootstrap_first_level(&t, &u0, self.rho, self.grid.dt, &opts)?;
        level_system(&t, &u0, &u1, self.rho, self.grid.dt)
    }
}

/// `M = round(10/h)` for the `[−5, 5]²` tables.
pub fn side_for_h(h: f64) -> Result<usize> {
    if !(h > 0.0) || h > 10.0 {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("must lie in (0, 10], got {h}"),
        });
    }
    Ok((10.0 / h).round() as usize)
}

/// Outcome of one benchmark solve. Resource-guard refusals are recorded, not
/// raised, so that table rows can show them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIter,
    Breakdown,
    Oom,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIter => "maxiter",
            Self::Breakdown => "breakdown",
            Self::Oom => "oom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: PrecondKind,
    pub status: RunStatus,
    pub iterations: Option<usize>,
    pub relres: Option<f64>,
    pub wall_time: f64,
    pub report: Option<SolveReport>,
}

impl RunRecord {
    /// Iteration count if the run converged.
    pub fn it(&self) -> Option<usize> {
        match self.status {
            RunStatus::Converged => self.iterations,
            _ => None,
        }
    }
}

/// Solves `sys` with GMRES and the given preconditioner.
pub fn run_method(sys: &BlockSystem<f64>, method: PrecondKind, opts: &SolveOptions) -> Result<RunRecord> {
    let opts = SolveOptions {
        precond: method,
        ..opts.clone()
    };
    let start = Instant::now();
    match solve_block(sys, &opts) {
        Ok((_, rep)) => Ok(RunRecord {
            method,
            status: match rep.status {
                SolveStatus::Converged => RunStatus::Converged,
                SolveStatus::MaxIter => RunStatus::MaxIter,
                SolveStatus::Breakdown => RunStatus::Breakdown,
            },
            iterations: Some(rep.iterations),
            relres: Some(rep.final_relres),
            wall_time: rep.wall_time,
            report: Some(rep),
        }),
        Err(Error::MemoryGuard { .. }) | Err(Error::SizeGuard { .. }) => Ok(RunRecord {
            method,
            status: RunStatus::Oom,
            iterations: None,
            relres: None,
            wall_time: start.elapsed().as_secs_f64(),
            report: None,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let p = Problem::table_1d(1.2, 2.0, 6400).unwrap();
        assert_eq!(p.grid.unknowns(), 6400);
        assert!((p.grid.h - 40.0 / 6401.0).abs() < 1e-15);
        assert!((p.grid.dt - 0.04).abs() < 1e-15);
        assert_eq!(side_for_h(1.0 / 32.0).unwrap(), 320);
        assert_eq!(side_for_h(1.0 / 64.0).unwrap(), 640);
        assert!(side_for_h(0.0).is_err());
        assert!(Problem::table_1d(2.5, 2.0, 10).is_err());
        assert!(Problem::table_1d(1.5, -1.0, 10).is_err());
    }

    #[test]
    fn small_second_level_system_solves() {
        let p = Problem::table_1d(1.5, 2.0, 64).unwrap();
        let sys = p.second_level_system().unwrap();
        let opts = SolveOptions::default();
        for kind in [PrecondKind::None, PrecondKind::Tau, PrecondKind::Circulant, PrecondKind::Exact] {
            let r = run_method(&sys, kind, &opts).unwrap();
            assert_eq!(r.status, RunStatus::Converged, "{}", kind.label());
            assert!(r.relres.unwrap() <= 1e-8 * 1.01);
        }
    }

    #[test]
    fn memory_guard_becomes_oom() {
        let p = Problem::table_1d(1.5, 2.0, 64).unwrap();
        let sys = p.second_level_system().unwrap();
        let opts = SolveOptions {
            memory_budget: 1000,
            ..SolveOptions::default()
        };
        let r = run_method(&sys, PrecondKind::None, &opts).unwrap();
        assert_eq!(r.status, RunStatus::Oom);
        assert_eq!(r.it(), None);
    }
}
