//! Three-level linearly implicit schemes in one and two dimensions.
//!
//! Each step solves `(D − T + iI) u^{n+1} = (iI + T − D) u^{n−1}` with
//! `D = ρΔt diag(|u^n|²)` and `T = (Δt/h^α) T_0` (or its Kronecker sum). The
//! first level comes from a linearised Crank–Nicolson step iterated twice.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex;

use crate::block::{BlockSystem, BlockVector};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::solvers::{solve_block, SolveOptions, SolveReport};
use crate::stencil::{centered_coeffs, FractionalOrder};
use crate::structured::{DiagonalBlock, FractionalToeplitz, Toeplitz2Op, ToeplitzOp};

/// Uniform grid with homogeneous Dirichlet data; only interior nodes are
/// unknowns. Two-dimensional grids are square with the same `[a, b]` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub n_steps: usize,
    pub t_end: f64,
    pub h: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn new(dim: usize, a: f64, b: f64, m: usize, n_steps: usize, t_end: f64) -> Result<Self> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if dim != 1 && dim != 2 {
            return bad("dim", format!("must be 1 or 2, got {dim}"));
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return bad("domain", format!("need a < b, got [{a}, {b}]"));
        }
        if m < 1 {
            return bad("M", "need at least one interior point".into());
        }
        if n_steps < 1 {
            return bad("N", "need at least one time step".into());
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return bad("t_end", format!("must be positive, got {t_end}"));
        }
        Ok(Self {
            dim,
            a,
            b,
            m,
            n_steps,
            t_end,
            h: (b - a) / (m + 1) as f64,
            dt: t_end / n_steps as f64,
        })
    }

    /// Grid with a prescribed time step, `t_end = N Δt`.
    pub fn with_dt(dim: usize, a: f64, b: f64, m: usize, dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(dim, a, b, m, n_steps, dt * n_steps as f64)
    }

    /// Number of unknowns, `M` or `M²`.
    pub fn unknowns(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Interior node `j` (zero based), `a + (j+1)h`.
    pub fn node(&self, j: usize) -> f64 {
        self.a + (j + 1) as f64 * self.h
    }

    /// `μ = Δt / h^α`.
    pub fn mu(&self, alpha: FractionalOrder) -> f64 {
        self.dt / self.h.powf(alpha.value())
    }

    /// `h^d`, the quadrature weight.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn toeplitz<T: Real>(&self, alpha: FractionalOrder) -> Result<FractionalToeplitz<T>> {
        let coeffs = Arc::new(centered_coeffs::<T>(alpha, self.m.max(2) - 1)?);
        let t1 = ToeplitzOp::new(T::of(self.mu(alpha)), coeffs, self.m)?;
        Ok(match self.dim {
            1 => FractionalToeplitz::OneLevel(t1),
            _ => FractionalToeplitz::TwoLevel(Toeplitz2Op::new(t1.clone(), t1)?),
        })
    }
}

/// Grid function at time level `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField<T> {
    pub u: Vec<Complex<T>>,
    pub level: usize,
}

impl<T: Real> StateField<T> {
    pub fn new(u: Vec<Complex<T>>, level: usize) -> Result<Self> {
        if u.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "u",
                reason: "state has non-finite entries".into(),
            });
        }
        Ok(Self { u, level })
    }

    pub fn zeros(n: usize, level: usize) -> Self {
        Self {
            u: vec![Complex::default(); n],
            level,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.u.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn require_dim(grid: &GridSpec, dim: usize) -> Result<()> {
    if grid.dim == dim {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "dim",
            reason: format!("expected a {dim}D grid, got {}D", grid.dim),
        })
    }
}

/// `sech(x) e^{2ix}` at the interior nodes.
pub fn initial_condition_1d<T: Real>(grid: &GridSpec) -> Result<StateField<T>> {
    require_dim(grid, 1)?;
    let u = (0..grid.m)
        .map(|j| {
            let x = grid.node(j);
            let s = 1.0 / x.cosh();
            Complex::new(T::of(s * (2.0 * x).cos()), T::of(s * (2.0 * x).sin()))
        })
        .collect();
    Ok(StateField { u, level: 0 })
}

/// `(2/√π) exp(−(x² + y²))` at the interior nodes, `x` index fastest.
pub fn initial_condition_2d<T: Real>(grid: &GridSpec) -> Result<StateField<T>> {
    require_dim(grid, 2)?;
    let m = grid.m;
    let amp = 2.0 / std::f64::consts::PI.sqrt();
    let mut u = Vec::with_capacity(m * m);
    for k in 0..m {
        let y = grid.node(k);
        for j in 0..m {
            let x = grid.node(j);
            u.push(Complex::from(T::of(amp * (-(x * x + y * y)).exp())));
        }
    }
    Ok(StateField { u, level: 0 })
}

pub fn initial_condition<T: Real>(grid: &GridSpec) -> Result<StateField<T>> {
    match grid.dim {
        1 => initial_condition_1d(grid),
        _ => initial_condition_2d(grid),
    }
}

/// `D = ρΔt diag(|u|²)`.
pub fn diagonal_from_state<T: Real>(u: &StateField<T>, rho: f64, dt: f64) -> Result<DiagonalBlock<T>> {
    if !(rho >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("need rho >= 0 and dt > 0, got rho = {rho}, dt = {dt}"),
        });
    }
    let s = T::of(rho * dt);
    DiagonalBlock::new(u.u.iter().map(|c| s * c.norm_sqr()).collect())
}

/// `b = (iI + T − D) u`.
pub fn step_rhs<T: Real>(
    u_prev: &StateField<T>,
    d: &DiagonalBlock<T>,
    t: &FractionalToeplitz<T>,
) -> Result<Vec<Complex<T>>> {
    check_len(t.dim(), u_prev.len())?;
    check_len(t.dim(), d.len())?;
    let mut tu = u_prev.u.clone();
    t.apply_in_place(&mut tu);
    Ok(u_prev
        .u
        .iter()
        .zip(tu)
        .zip(d.entries())
        .map(|((&u, tu), &di)| crate::scalar::mul_i(u) + tu - u * di)
        .collect())
}

/// Block system for `u^{n+1}` from the levels `n−1` and `n`.
pub fn level_system<T: Real>(
    t: &FractionalToeplitz<T>,
    u_prev: &StateField<T>,
    u_cur: &StateField<T>,
    rho: f64,
    dt: f64,
) -> Result<BlockSystem<T>> {
    if u_cur.level != u_prev.level + 1 {
        return Err(Error::InvalidParameter {
            name: "level",
            reason: format!("levels {} and {} are not consecutive", u_prev.level, u_cur.level),
        });
    }
    let d = diagonal_from_state(u_cur, rho, dt)?;
    let b = step_rhs(u_prev, &d, t)?;
    BlockSystem::from_complex(t.clone(), d, &b)
}

/// Picard iterations of the first-level Crank–Nicolson step.
pub const BOOTSTRAP_SWEEPS: usize = 2;

/// `u¹` from `(iI − T/2 + D_s/2) u¹ = (iI + T/2 − D_s/2) u⁰` with
/// `D_s = ρΔt diag(|u^{(s)}|²)`, `u^{(0)} = u⁰`, iterated
/// [`BOOTSTRAP_SWEEPS`] times. Returns the level and the Picard increments
/// `‖u^{(s+1)} − u^{(s)}‖`.
pub fn bootstrap_first_level<T: Real>(
    t: &FractionalToeplitz<T>,
    u0: &StateField<T>,
    rho: f64,
    dt: f64,
    opts: &SolveOptions,
) -> Result<(StateField<T>, Vec<f64>, Vec<SolveReport>)> {
    check_len(t.dim(), u0.len())?;
    let half = t.scaled(T::of(0.5))?;
    let mut iterate = u0.clone();
    let mut increments = Vec::with_capacity(BOOTSTRAP_SWEEPS);
    let mut reports = Vec::with_capacity(BOOTSTRAP_SWEEPS);
    for _ in 0..BOOTSTRAP_SWEEPS {
        let d = diagonal_from_state(&iterate, rho, dt)?.scaled(T::of(0.5));
        let b = step_rhs(u0, &d, &half)?;
        let sys = BlockSystem::from_complex(half.clone(), d, &b)?;
        let (x, rep) = solve_block(&sys, opts)?;
        if !rep.converged {
            return Err(Error::SolverFailure(format!(
                "bootstrap solve stopped at relative residual {:e}",
                rep.final_relres
            )));
        }
        let next = x.lift();
        let inc = next
            .iter()
            .zip(&iterate.u)
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<T>()
            .sqrt();
        increments.push(inc.to_f64_lossy());
        reports.push(rep);
        iterate = StateField { u: next, level: 1 };
    }
    Ok((iterate, increments, reports))
}

/// `Q^n = (h^d/2)(‖u^{n+1}‖² + ‖u^n‖²)`.
pub fn mass<T: Real>(u_n: &StateField<T>, u_np1: &StateField<T>, grid: &GridSpec) -> f64 {
    0.5 * grid.cell() * (u_n.norm_sqr() + u_np1.norm_sqr()).to_f64_lossy()
}

/// `E^n = (h^d/2)(⟨A u^{n+1}, u^{n+1}⟩ + ⟨A u^n, u^n⟩) − (ρh^d/2) Σ |u^{n+1}|²|u^n|²`
/// with `A = T/Δt`.
pub fn energy<T: Real>(
    u_n: &StateField<T>,
    u_np1: &StateField<T>,
    t: &FractionalToeplitz<T>,
    grid: &GridSpec,
    rho: f64,
) -> Result<f64> {
    check_len(t.dim(), u_n.len())?;
    check_len(t.dim(), u_np1.len())?;
    let quad = |u: &StateField<T>| -> f64 {
        let mut tu = u.u.clone();
        t.apply_in_place(&mut tu);
        u.u.iter()
            .zip(&tu)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<T>()
            .to_f64_lossy()
    };
    let cross: f64 = u_n
        .u
        .iter()
        .zip(&u_np1.u)
        .map(|(a, b)| a.norm_sqr() * b.norm_sqr())
        .sum::<T>()
        .to_f64_lossy();
    let cell = grid.cell();
    Ok(0.5 * cell * (quad(u_n) + quad(u_np1)) / grid.dt - 0.5 * rho * cell * cross)
}

/// Sequential time stepper owning the two most recent levels.
#[derive(Debug, Clone)]
pub struct Stepper<T: Real> {
    grid: GridSpec,
    rho: f64,
    t: FractionalToeplitz<T>,
    opts: SolveOptions,
    prev: StateField<T>,
    cur: StateField<T>,
}

impl<T: Real> Stepper<T> {
    /// Bootstraps level 1 from `u0`.
    pub fn new(grid: GridSpec, alpha: FractionalOrder, rho: f64, u0: StateField<T>, opts: SolveOptions) -> Result<Self> {
        let t = grid.toeplitz(alpha)?;
        let (u1, _, _) = bootstrap_first_level(&t, &u0, rho, grid.dt, &opts)?;
        Ok(Self {
            grid,
            rho,
            t,
            opts,
            prev: u0,
            cur: u1,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn toeplitz(&self) -> &FractionalToeplitz<T> {
        &self.t
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    /// Relaxation parameter used by the following steps.
    pub fn set_omega(&mut self, omega: f64) {
        self.opts.omega = omega;
    }

    /// `(u^{n-1}, u^n)`.
    pub fn levels(&self) -> (&StateField<T>, &StateField<T>) {
        (&self.prev, &self.cur)
    }

    pub fn level(&self) -> usize {
        self.cur.level
    }

    /// The system that the next call to [`Stepper::step`] solves.
    pub fn next_system(&self) -> Result<BlockSystem<T>> {
        level_system(&self.t, &self.prev, &self.cur, self.rho, self.grid.dt)
    }

    pub fn step(&mut self) -> Result<SolveReport> {
        let sys = self.next_system()?;
        let (x, rep) = solve_block(&sys, &self.opts)?;
        if !rep.converged {
            return Err(Error::SolverFailure(format!(
                "level {} solve stopped after {} iterations at relative residual {:e}",
                self.cur.level + 1,
                rep.iterations,
                rep.final_relres
            )));
        }
        let next = StateField {
            u: x.lift(),
            level: self.cur.level + 1,
        };
        self.prev = std::mem::replace(&mut self.cur, next);
        Ok(rep)
    }

    pub fn mass(&self) -> f64 {
        mass(&self.prev, &self.cur, &self.grid)
    }

    pub fn energy(&self) -> Result<f64> {
        energy(&self.prev, &self.cur, &self.t, &self.grid, self.rho)
    }
}

/// `(index, re, im)` rows.
pub fn write_state_csv<T: Real, W: Write>(state: &StateField<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "index,re,im")?;
    for (i, c) in state.u.iter().enumerate() {
        writeln!(w, "{i},{:.17e},{:.17e}", c.re.to_f64_lossy(), c.im.to_f64_lossy())?;
    }
    Ok(())
}

/// Little-endian `f64` dump: header `(dim, M, N, α, ρ, Δt, h, level)`
/// followed by interleaved `(re, im)` pairs.
pub fn write_state_binary<T: Real, W: Write>(
    state: &StateField<T>,
    grid: &GridSpec,
    alpha: FractionalOrder,
    rho: f64,
    mut w: W,
) -> io::Result<()> {
    let header = [
        grid.dim as f64,
        grid.m as f64,
        grid.n_steps as f64,
        alpha.value(),
        rho,
        grid.dt,
        grid.h,
        state.level as f64,
    ];
    for v in header {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in &state.u {
        w.write_all(&c.re.to_f64_lossy().to_le_bytes())?;
        w.write_all(&c.im.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

/// Inverse of [`write_state_binary`]: header values and the field.
pub fn read_state_binary(bytes: &[u8]) -> Result<([f64; 8], StateField<f64>)> {
    if bytes.len() < 64 || !bytes.len().is_multiple_of(16) {
        return Err(Error::InvalidParameter {
            name: "dump",
            reason: format!("{} bytes is not a header plus complex pairs", bytes.len()),
        });
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight")))
        .collect();
    let mut header = [0.0; 8];
    header.copy_from_slice(&vals[..8]);
    let u = vals[8..].chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
    Ok((
        header,
        StateField {
            u,
            level: header[7] as usize,
        },
    ))
}

/// Block form of a state, `[Im u; Re u]`.
pub fn state_block<T: Real>(u: &StateField<T>) -> BlockVector<T> {
    BlockVector::from_unknown(&u.u)
}
