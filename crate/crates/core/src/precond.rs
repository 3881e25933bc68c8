//! Inverses of the TBAN-type preconditioners
//! `F = (1/2ω)(ωI + 𝒳)(ωI + 𝒟)` with `𝒳 = [[0, X], [−X, 0]]` and `X` one of
//! `T`, `τ(T)` or the Strang circulant `C`.
//!
//! Both factors are solved on the packed complex vector `r_z + i r_y`:
//! `(ωI + 𝒳)` becomes `ω − iX` and `(ωI + 𝒟)` becomes the diagonal
//! `ω + 1 + iD`.

use num_complex::Complex;

use crate::block::BlockVector;
use crate::dense::{Cholesky, DenseMatrix};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::solvers::LinearOperator;
use crate::structured::{CirculantOp, DiagonalBlock, FractionalToeplitz, TauOp};

/// Largest dimension for which dense factorizations are attempted.
pub const DENSE_LIMIT: usize = 4096;

fn check_omega<T: Real>(omega: T) -> Result<()> {
    if omega > T::zero() && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must be positive, got {omega}"),
        })
    }
}

pub(crate) fn pack<T: Real>(r: &BlockVector<T>) -> Vec<Complex<T>> {
    r.z.iter().zip(&r.y).map(|(&z, &y)| Complex::new(z, y)).collect()
}

pub(crate) fn unpack<T: Real>(w: &[Complex<T>]) -> BlockVector<T> {
    BlockVector {
        z: w.iter().map(|c| c.re).collect(),
        y: w.iter().map(|c| c.im).collect(),
    }
}

fn pack_flat<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex::new(x[i], x[n + i])).collect()
}

fn unpack_flat<T: Real>(w: &[Complex<T>], out: &mut [T]) {
    let n = w.len();
    for (i, c) in w.iter().enumerate() {
        out[i] = c.re;
        out[n + i] = c.im;
    }
}

/// `(ωI + 𝒟)⁻¹` on a packed vector.
pub(crate) fn solve_d_stage<T: Real>(w: &mut [Complex<T>], omega: T, d: &DiagonalBlock<T>) {
    let s = omega + T::one();
    for (v, &di) in w.iter_mut().zip(d.entries()) {
        *v /= Complex::new(s, di);
    }
}

/// Applies `(ωI + 𝒟)` on a packed vector.
pub(crate) fn apply_d_shift<T: Real>(w: &mut [Complex<T>], omega: T, d: &DiagonalBlock<T>) {
    let s = omega + T::one();
    for (v, &di) in w.iter_mut().zip(d.entries()) {
        *v *= Complex::new(s, di);
    }
}

/// `F̃⁻¹` with `X = τ(T_d)`.
#[derive(Debug, Clone)]
pub struct TauPreconditioner<T: Real> {
    omega: T,
    tau: TauOp<T>,
    d: DiagonalBlock<T>,
}

impl<T: Real> TauPreconditioner<T> {
    pub fn new(omega: T, tau: TauOp<T>, d: DiagonalBlock<T>) -> Result<Self> {
        check_omega(omega)?;
        check_len(tau.dim(), d.len())?;
        Ok(Self { omega, tau, d })
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn tau(&self) -> &TauOp<T> {
        &self.tau
    }

    /// In place on `r_z + i r_y`.
    pub fn apply_packed(&self, w: &mut [Complex<T>]) {
        let om = self.omega;
        let two_om = om + om;
        self.tau.apply_spectral(w, |lam| {
            Complex::new(om, lam) * (two_om / (om * om + lam * lam))
        });
        solve_d_stage(w, om, &self.d);
    }

    pub fn apply_inverse(&self, r: &BlockVector<T>) -> Result<BlockVector<T>> {
        check_len(self.dim(), r.half())?;
        check_len(self.dim(), r.y.len())?;
        let mut w = pack(r);
        self.apply_packed(&mut w);
        Ok(unpack(&w))
    }
}

impl<T: Real> LinearOperator<T> for TauPreconditioner<T> {
    fn dim(&self) -> usize {
        2 * self.d.len()
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        let mut w = pack_flat(x);
        self.apply_packed(&mut w);
        unpack_flat(&w, out);
    }
}

/// `F_C⁻¹` with `X` the Strang circulant of `T_d`.
#[derive(Debug, Clone)]
pub struct CirculantPreconditioner<T: Real> {
    omega: T,
    circ: CirculantOp<T>,
    d: DiagonalBlock<T>,
}

impl<T: Real> CirculantPreconditioner<T> {
    pub fn new(omega: T, circ: CirculantOp<T>, d: DiagonalBlock<T>) -> Result<Self> {
        check_omega(omega)?;
        check_len(circ.dim(), d.len())?;
        Ok(Self { omega, circ, d })
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn circulant(&self) -> &CirculantOp<T> {
        &self.circ
    }

    /// In place on `r_z + i r_y`; valid for complex eigenvalues `γ` too,
    /// since `ω − iC` is then still the packed form of `ωI + 𝒞`.
    pub fn apply_packed(&self, w: &mut [Complex<T>]) {
        let om = self.omega;
        let two_om = Complex::from(om + om);
        self.circ
            .apply_spectral(w, |g| two_om / (Complex::from(om) - crate::scalar::mul_i(g)));
        solve_d_stage(w, om, &self.d);
    }

    pub fn apply_inverse(&self, r: &BlockVector<T>) -> Result<BlockVector<T>> {
        check_len(self.dim(), r.half())?;
        check_len(self.dim(), r.y.len())?;
        let mut w = pack(r);
        self.apply_packed(&mut w);
        Ok(unpack(&w))
    }

    /// Unpacked variant: both halves are Fourier transformed separately,
    /// each mode solves `[[ω, γ], [−γ, ω]] ŵ = 2ω r̂`, and the imaginary part
    /// left after the inverse transform is measured. Returns the result and
    /// that residue; fails if it exceeds `1e-8 ‖r‖`.
    pub fn apply_inverse_checked(&self, r: &BlockVector<T>) -> Result<(BlockVector<T>, f64)> {
        let n = self.dim();
        check_len(n, r.half())?;
        check_len(n, r.y.len())?;
        let om = self.omega;
        let lift = |v: &[T]| -> Vec<Complex<T>> { v.iter().map(|&x| Complex::from(x)).collect() };
        let mut wz = lift(&r.z);
        let mut wy = lift(&r.y);
        self.circ.forward(&mut wz);
        self.circ.forward(&mut wy);
        let two_om = Complex::from(om + om);
        for ((a, b), &g) in wz.iter_mut().zip(wy.iter_mut()).zip(self.circ.eigenvalues()) {
            let det = Complex::from(om * om) + g * g;
            let (za, yb) = (*a, *b);
            *a = two_om * (za * om - g * yb) / det;
            *b = two_om * (g * za + yb * om) / det;
        }
        self.circ.inverse(&mut wz);
        self.circ.inverse(&mut wy);
        let residue = wz
            .iter()
            .chain(&wy)
            .map(|c| (c.im * c.im).to_f64_lossy())
            .sum::<f64>()
            .sqrt();
        let limit = 1e-8 * r.norm().to_f64_lossy();
        if residue > limit {
            return Err(Error::ImaginaryResidue { residue, limit });
        }
        let mut w: Vec<Complex<T>> = wz.iter().zip(&wy).map(|(a, b)| Complex::new(a.re, b.re)).collect();
        solve_d_stage(&mut w, om, &self.d);
        Ok((unpack(&w), residue))
    }
}

impl<T: Real> LinearOperator<T> for CirculantPreconditioner<T> {
    fn dim(&self) -> usize {
        2 * self.d.len()
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        let mut w = pack_flat(x);
        self.apply_packed(&mut w);
        unpack_flat(&w, out);
    }
}

/// Solver for `(ω − iT) w = r`, i.e. `(ωI + 𝒯) x = r` in packed form,
/// through `w = (ω + iT)(ω²I + T²)⁻¹ r`.
#[derive(Debug, Clone)]
pub enum ShiftedToeplitzSolver<T: Real> {
    Dense {
        omega: T,
        t: FractionalToeplitz<T>,
        chol: Cholesky<T>,
    },
    /// Conjugate gradients on `ω²I + T²`, two Toeplitz products per step.
    Cg {
        omega: T,
        t: FractionalToeplitz<T>,
        tol: T,
        max_iter: usize,
    },
}

impl<T: Real> ShiftedToeplitzSolver<T> {
    pub fn dense(omega: T, t: FractionalToeplitz<T>) -> Result<Self> {
        check_omega(omega)?;
        let n = t.dim();
        if n > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                n,
                limit: DENSE_LIMIT,
            });
        }
        let td = t.to_dense();
        let mut a = td.matmul(&td);
        a.add_scaled_identity(omega * omega);
        let chol = a.cholesky()?;
        Ok(Self::Dense { omega, t, chol })
    }

    pub fn cg(omega: T, t: FractionalToeplitz<T>, tol: T, max_iter: usize) -> Result<Self> {
        check_omega(omega)?;
        Ok(Self::Cg {
            omega,
            t,
            tol,
            max_iter,
        })
    }

    fn parts(&self) -> (T, &FractionalToeplitz<T>) {
        match self {
            Self::Dense { omega, t, .. } | Self::Cg { omega, t, .. } => (*omega, t),
        }
    }

    /// Solves in place; returns the number of inner iterations (0 when dense).
    pub fn solve(&self, r: &mut [Complex<T>]) -> Result<usize> {
        let (omega, t) = self.parts();
        let iters = match self {
            Self::Dense { chol, .. } => {
                let re: Vec<T> = r.iter().map(|c| c.re).collect();
                let im: Vec<T> = r.iter().map(|c| c.im).collect();
                let a = chol.solve(&re);
                let b = chol.solve(&im);
                for (v, (x, y)) in r.iter_mut().zip(a.into_iter().zip(b)) {
                    *v = Complex::new(x, y);
                }
                0
            }
            Self::Cg { tol, max_iter, .. } => cg_shifted_square(omega, t, r, *tol, *max_iter)?,
        };
        let mut tv = r.to_vec();
        t.apply_in_place(&mut tv);
        for (v, tvi) in r.iter_mut().zip(tv) {
            *v = *v * omega + crate::scalar::mul_i(tvi);
        }
        Ok(iters)
    }
}

fn cg_shifted_square<T: Real>(
    omega: T,
    t: &FractionalToeplitz<T>,
    b: &mut [Complex<T>],
    tol: T,
    max_iter: usize,
) -> Result<usize> {
    let n = b.len();
    let op = |x: &[Complex<T>]| -> Vec<Complex<T>> {
        let mut y = x.to_vec();
        t.apply_in_place(&mut y);
        t.apply_in_place(&mut y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += *xi * (omega * omega);
        }
        y
    };
    let nrm = |v: &[Complex<T>]| v.iter().map(|c| c.norm_sqr()).sum::<T>();
    let bnorm2 = nrm(b);
    if bnorm2 == T::zero() {
        return Ok(0);
    }
    let mut x = vec![Complex::<T>::default(); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = bnorm2;
    let target = tol * tol * bnorm2;
    for it in 1..=max_iter {
        let ap = op(&p);
        let pap: T = p.iter().zip(&ap).map(|(a, b)| (a.conj() * b).re).sum();
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rr_new = nrm(&r);
        if rr_new <= target {
            b.copy_from_slice(&x);
            return Ok(it);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
        rr = rr_new;
    }
    Err(Error::SolverFailure(format!(
        "inner CG did not reach {tol} in {max_iter} iterations"
    )))
}

/// `F⁻¹` with the exact Toeplitz part, dense-factored. Small sizes only.
#[derive(Debug, Clone)]
pub struct ExactPreconditioner<T: Real> {
    omega: T,
    solver: ShiftedToeplitzSolver<T>,
    d: DiagonalBlock<T>,
}

impl<T: Real> ExactPreconditioner<T> {
    pub fn new(omega: T, t: FractionalToeplitz<T>, d: DiagonalBlock<T>) -> Result<Self> {
        check_len(t.dim(), d.len())?;
        let solver = ShiftedToeplitzSolver::dense(omega, t)?;
        Ok(Self { omega, solver, d })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn apply_packed(&self, w: &mut [Complex<T>]) {
        let two_om = self.omega + self.omega;
        for v in w.iter_mut() {
            *v *= two_om;
        }
        self.solver.solve(w).expect("dense solve cannot fail after factorization");
        solve_d_stage(w, self.omega, &self.d);
    }

    pub fn apply_inverse(&self, r: &BlockVector<T>) -> Result<BlockVector<T>> {
        check_len(self.dim(), r.half())?;
        check_len(self.dim(), r.y.len())?;
        let mut w = pack(r);
        self.apply_packed(&mut w);
        Ok(unpack(&w))
    }
}

impl<T: Real> LinearOperator<T> for ExactPreconditioner<T> {
    fn dim(&self) -> usize {
        2 * self.d.len()
    }
    fn apply(&self, x: &[T], out: &mut [T]) {
        let mut w = pack_flat(x);
        self.apply_packed(&mut w);
        unpack_flat(&w, out);
    }
}

/// Dense `(1/2ω)(ωI + [[0, X], [−X, 0]])(ωI + [[I, −D], [D, I]])` in the
/// `[z; y]` ordering, for oracle comparisons.
pub fn assemble_dense_f<T: Real>(omega: T, x: &DenseMatrix<T>, d: &DiagonalBlock<T>) -> DenseMatrix<T> {
    let n = x.rows();
    let first = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let diag = if i == j { omega } else { T::zero() };
        match (i < n, j < n) {
            (true, false) => diag + x[(i, j - n)],
            (false, true) => diag - x[(i - n, j)],
            _ => diag,
        }
    });
    let dd = d.entries();
    let second = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i % n, j % n);
        if bi != bj {
            return T::zero();
        }
        match (i < n, j < n) {
            (true, true) | (false, false) => omega + T::one(),
            (true, false) => -dd[bi],
            (false, true) => dd[bi],
        }
    });
    let mut f = first.matmul(&second);
    let s = T::one() / (omega + omega);
    for i in 0..2 * n {
        for j in 0..2 * n {
            f[(i, j)] *= s;
        }
    }
    f
}
