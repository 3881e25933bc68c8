//! Matrix-free structured operators: 1- and 2-level symmetric Toeplitz
//! matrices built from the fractional stencil, their τ (sine-transform
//! algebra) and Strang circulant approximations, and the nonnegative diagonal
//! of the nonlinear term.
//!
//! Two-level fields are `M × M` arrays stored column-major, `vec(U)` with the
//! `x` index running fastest, so `I ⊗ T_x` acts on contiguous blocks and
//! `T_y ⊗ I` acts across them.

use std::sync::Arc;

use num_complex::Complex;

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::stencil::{centered_coeffs, FractionalOrder, StencilCoeffs};
use crate::trig::{transpose_square, Fourier, SineKernel};

type Buf<T> = Vec<Complex<T>>;

/// Symmetric Toeplitz matrix `μ·T_0` with entries `μ c_{|i-j|}`.
///
/// Products use a zero-padded circulant embedding of size `2M`.
#[derive(Clone, Debug)]
pub struct ToeplitzOp<T: Real> {
    mu: T,
    m: usize,
    coeffs: Arc<StencilCoeffs<T>>,
    fourier: Fourier<T>,
    // FFT of the embedding column, already divided by 2M
    symbol: Vec<Complex<T>>,
}

impl<T: Real> ToeplitzOp<T> {
    pub fn new(mu: T, coeffs: Arc<StencilCoeffs<T>>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "M",
                reason: "operator size must be positive".into(),
            });
        }
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be positive and finite, got {mu}"),
            });
        }
        if coeffs.max_lag() + 1 < m {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: format!("need {m} coefficients, have {}", coeffs.max_lag() + 1),
            });
        }
        let n = 2 * m;
        let fourier = Fourier::new(n);
        let mut col = vec![Complex::default(); n];
        col[0] = Complex::from(mu * coeffs.get(0));
        for k in 1..m {
            let v = Complex::from(mu * coeffs.get(k));
            col[k] = v;
            col[n - k] = v;
        }
        let mut scratch = Vec::new();
        fourier.forward(&mut col, &mut scratch);
        let inv = T::one() / T::of_usize(n);
        for v in col.iter_mut() {
            *v *= inv;
        }
        Ok(Self {
            mu,
            m,
            coeffs,
            fourier,
            symbol: col,
        })
    }

    /// Builds the stencil on the spot; prefer [`ToeplitzOp::new`] with a
    /// cached sequence when many operators share one order.
    pub fn from_order(alpha: FractionalOrder, mu: T, m: usize) -> Result<Self> {
        let coeffs = centered_coeffs(alpha, m.max(2) - 1)?;
        Self::new(mu, Arc::new(coeffs), m)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn coeffs(&self) -> &StencilCoeffs<T> {
        &self.coeffs
    }

    /// Entry `μ c_k` on the `k`-th off diagonal.
    #[inline]
    pub fn diag_entry(&self, k: usize) -> T {
        self.mu * self.coeffs.get(k)
    }

    /// A copy with `μ` replaced; the stencil is shared.
    pub fn with_mu(&self, mu: T) -> Result<Self> {
        Self::new(mu, Arc::clone(&self.coeffs), self.m)
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.m, x.len())?;
        let mut data: Buf<T> = x.iter().map(|&v| Complex::from(v)).collect();
        self.apply_lines(&mut data, &mut Vec::new(), &mut Vec::new());
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    pub fn apply_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.m, x.len())?;
        let mut data = x.to_vec();
        self.apply_lines(&mut data, &mut Vec::new(), &mut Vec::new());
        Ok(data)
    }

    /// Multiplies every consecutive chunk of `M` entries by the matrix, in place.
    pub fn apply_lines(&self, data: &mut [Complex<T>], work: &mut Buf<T>, scratch: &mut Buf<T>) {
        let m = self.m;
        let n = 2 * m;
        let count = data.len() / m;
        debug_assert_eq!(count * m, data.len());
        work.clear();
        work.resize(count * n, Complex::default());
        for (src, dst) in data.chunks_exact(m).zip(work.chunks_exact_mut(n)) {
            dst[..m].copy_from_slice(src);
        }
        self.fourier.forward(work, scratch);
        for line in work.chunks_exact_mut(n) {
            for (v, s) in line.iter_mut().zip(&self.symbol) {
                *v *= *s;
            }
        }
        self.fourier.inverse(work, scratch);
        for (dst, src) in data.chunks_exact_mut(m).zip(work.chunks_exact(n)) {
            dst.copy_from_slice(&src[..m]);
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.m, self.m, |i, j| self.diag_entry(i.abs_diff(j)))
    }

    /// Hankel correction `HC(T)`: entries `μ c_{i+j}` above the three zero
    /// central anti-diagonals and `μ c_{2M+2-i-j}` below them (one-based).
    pub fn hankel_correction_dense(&self) -> DenseMatrix<T> {
        let m = self.m;
        DenseMatrix::from_fn(m, m, |i, j| {
            let s = i + j + 2;
            if s < m {
                self.diag_entry(s)
            } else if s > m + 2 {
                self.diag_entry(2 * m + 2 - s)
            } else {
                T::zero()
            }
        })
    }

    /// Dense `τ(T) = T − HC(T)`.
    pub fn tau_dense(&self) -> DenseMatrix<T> {
        let t = self.to_dense();
        let hc = self.hankel_correction_dense();
        DenseMatrix::from_fn(self.m, self.m, |i, j| t[(i, j)] - hc[(i, j)])
    }

    /// First column of the Strang circulant approximation.
    pub fn strang_column(&self) -> Vec<T> {
        let m = self.m;
        let mut col = vec![T::zero(); m];
        col[0] = self.diag_entry(0);
        for k in 1..=m / 2 {
            col[k] = self.diag_entry(k);
        }
        for k in 1..=(m - 1) / 2 {
            col[m - k] = self.diag_entry(k);
        }
        col
    }

    /// First column of T. Chan's optimal circulant,
    /// `c_k = ((M − k) t_k + k t_{M−k}) / M`, the Frobenius-nearest circulant.
    pub fn optimal_column(&self) -> Vec<T> {
        let m = self.m;
        let mf = T::of_usize(m);
        (0..m)
            .map(|k| {
                if k == 0 {
                    self.diag_entry(0)
                } else {
                    (T::of_usize(m - k) * self.diag_entry(k) + T::of_usize(k) * self.diag_entry(m - k)) / mf
                }
            })
            .collect()
    }

    pub fn circulant_column(&self, kind: CirculantKind) -> Vec<T> {
        match kind {
            CirculantKind::Strang => self.strang_column(),
            CirculantKind::Optimal => self.optimal_column(),
        }
    }
}

/// Which circulant approximates a Toeplitz matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CirculantKind {
    /// Central diagonals copied and wrapped.
    Strang,
    /// T. Chan's optimal circulant.
    #[default]
    Optimal,
}

impl CirculantKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Strang => "strang",
            Self::Optimal => "optimal",
        }
    }
}

impl std::str::FromStr for CirculantKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "strang" => Ok(Self::Strang),
            "optimal" => Ok(Self::Optimal),
            other => Err(format!("unknown circulant `{other}` (strang|optimal)")),
        }
    }
}

/// Two-level Toeplitz matrix `I ⊗ T_x + T_y ⊗ I` acting on `M × M` fields.
#[derive(Clone, Debug)]
pub struct Toeplitz2Op<T: Real> {
    tx: ToeplitzOp<T>,
    ty: ToeplitzOp<T>,
}

impl<T: Real> Toeplitz2Op<T> {
    pub fn new(tx: ToeplitzOp<T>, ty: ToeplitzOp<T>) -> Result<Self> {
        if tx.size() != ty.size() {
            return Err(Error::InvalidParameter {
                name: "ty",
                reason: format!(
                    "square grids only: T_x has size {}, T_y has size {}",
                    tx.size(),
                    ty.size()
                ),
            });
        }
        Ok(Self { tx, ty })
    }

    pub fn tx(&self) -> &ToeplitzOp<T> {
        &self.tx
    }

    pub fn ty(&self) -> &ToeplitzOp<T> {
        &self.ty
    }

    /// Points per axis.
    #[inline]
    pub fn side(&self) -> usize {
        self.tx.size()
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.side() * self.side()
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.size(), x.len())?;
        let mut data: Buf<T> = x.iter().map(|&v| Complex::from(v)).collect();
        self.apply_in_place(&mut data);
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    pub fn apply_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.size(), x.len())?;
        let mut data = x.to_vec();
        self.apply_in_place(&mut data);
        Ok(data)
    }

    pub fn apply_in_place(&self, data: &mut [Complex<T>]) {
        let m = self.side();
        let mut work = Vec::new();
        let mut scratch = Vec::new();
        let mut across = data.to_vec();
        self.tx.apply_lines(data, &mut work, &mut scratch);
        transpose_square(&mut across, m);
        self.ty.apply_lines(&mut across, &mut work, &mut scratch);
        transpose_square(&mut across, m);
        for (d, a) in data.iter_mut().zip(&across) {
            *d += *a;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let m = self.side();
        let eye = DenseMatrix::identity(m);
        let a = eye.kron(&self.tx.to_dense());
        let b = self.ty.to_dense().kron(&eye);
        DenseMatrix::from_fn(m * m, m * m, |i, j| a[(i, j)] + b[(i, j)])
    }
}

/// The Toeplitz part `T_d` of a time-level system, one or two levels.
#[derive(Clone, Debug)]
pub enum FractionalToeplitz<T: Real> {
    OneLevel(ToeplitzOp<T>),
    TwoLevel(Toeplitz2Op<T>),
}

impl<T: Real> FractionalToeplitz<T> {
    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        match self {
            Self::OneLevel(t) => t.size(),
            Self::TwoLevel(t) => t.size(),
        }
    }

    pub fn levels(&self) -> usize {
        match self {
            Self::OneLevel(_) => 1,
            Self::TwoLevel(_) => 2,
        }
    }

    pub fn apply_in_place(&self, data: &mut [Complex<T>]) {
        match self {
            Self::OneLevel(t) => t.apply_lines(data, &mut Vec::new(), &mut Vec::new()),
            Self::TwoLevel(t) => t.apply_in_place(data),
        }
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Self::OneLevel(t) => t.apply(x),
            Self::TwoLevel(t) => t.apply(x),
        }
    }

    pub fn apply_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.dim(), x.len())?;
        let mut data = x.to_vec();
        self.apply_in_place(&mut data);
        Ok(data)
    }

    /// `(T a, T b)` with one complex product.
    pub fn apply_pair(&self, a: &[T], b: &[T], out_a: &mut [T], out_b: &mut [T]) {
        let mut data: Buf<T> = a.iter().zip(b).map(|(&p, &q)| Complex::new(p, q)).collect();
        self.apply_in_place(&mut data);
        for ((c, oa), ob) in data.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *oa = c.re;
            *ob = c.im;
        }
    }

    /// Same operator with every `μ` multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Ok(match self {
            Self::OneLevel(t) => Self::OneLevel(t.with_mu(t.mu() * factor)?),
            Self::TwoLevel(t) => Self::TwoLevel(Toeplitz2Op::new(
                t.tx.with_mu(t.tx.mu() * factor)?,
                t.ty.with_mu(t.ty.mu() * factor)?,
            )?),
        })
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        match self {
            Self::OneLevel(t) => t.to_dense(),
            Self::TwoLevel(t) => t.to_dense(),
        }
    }

    pub fn tau(&self) -> TauOp<T> {
        match self {
            Self::OneLevel(t) => TauOp::from_toeplitz(t),
            Self::TwoLevel(t) => TauOp::from_toeplitz2(t),
        }
    }

    pub fn circulant(&self, kind: CirculantKind) -> Result<CirculantOp<T>> {
        match self {
            Self::OneLevel(t) => CirculantOp::from_toeplitz(t, kind),
            Self::TwoLevel(t) => CirculantOp::from_toeplitz2(t, kind),
        }
    }

    /// Dense `τ(T_d)`, assembled from the Hankel correction (no transforms).
    pub fn tau_dense(&self) -> DenseMatrix<T> {
        match self {
            Self::OneLevel(t) => t.tau_dense(),
            Self::TwoLevel(t) => {
                let m = t.side();
                let eye = DenseMatrix::identity(m);
                let a = eye.kron(&t.tx.tau_dense());
                let b = t.ty.tau_dense().kron(&eye);
                DenseMatrix::from_fn(m * m, m * m, |i, j| a[(i, j)] + b[(i, j)])
            }
        }
    }
}

/// τ-matrix approximation, diagonalised by the sine transform:
/// `τ(T) = S diag(eigs) S` (one level) or `(S⊗S) diag(eigs) (S⊗S)` (two levels).
#[derive(Clone, Debug)]
pub struct TauOp<T: Real> {
    levels: usize,
    side: usize,
    eigs: Vec<T>,
    kernel: SineKernel<T>,
}

impl<T: Real> TauOp<T> {
    /// Eigenvalues from one sine transform of the first column of `τ(T)`,
    /// divided by the first column of `S`.
    pub fn from_toeplitz(op: &ToeplitzOp<T>) -> Self {
        let m = op.size();
        let kernel = SineKernel::new(m);
        let mut col: Buf<T> = (0..m)
            .map(|i| {
                let hc = if i + 2 < m { op.diag_entry(i + 2) } else { T::zero() };
                Complex::from(op.diag_entry(i) - hc)
            })
            .collect();
        kernel.transform(&mut col, &mut Vec::new(), &mut Vec::new());
        let mp1 = T::of_usize(m + 1);
        let norm = (T::of(2.0) / mp1).sqrt();
        let eigs = col
            .iter()
            .enumerate()
            .map(|(k, v)| v.re / (norm * (T::PI() * T::of_usize(k + 1) / mp1).sin()))
            .collect();
        Self {
            levels: 1,
            side: m,
            eigs,
            kernel,
        }
    }

    /// `τ(T_2) = I ⊗ τ(T_x) + τ(T_y) ⊗ I`; eigenvalues are all sums of the
    /// one-level eigenvalues.
    pub fn from_toeplitz2(op: &Toeplitz2Op<T>) -> Self {
        let tx = Self::from_toeplitz(op.tx());
        let ty = Self::from_toeplitz(op.ty());
        let m = op.side();
        let mut eigs = Vec::with_capacity(m * m);
        for k in 0..m {
            for j in 0..m {
                eigs.push(tx.eigs[j] + ty.eigs[k]);
            }
        }
        Self {
            levels: 2,
            side: m,
            eigs,
            kernel: tx.kernel,
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.eigs.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigs
    }

    /// `data ← Sᵈ diag(f(λ)) Sᵈ data`.
    pub fn apply_spectral(&self, data: &mut [Complex<T>], f: impl Fn(T) -> Complex<T>) {
        debug_assert_eq!(data.len(), self.dim());
        let mut work = Vec::new();
        let mut scratch = Vec::new();
        self.transform(data, &mut work, &mut scratch);
        for (v, &lam) in data.iter_mut().zip(&self.eigs) {
            *v *= f(lam);
        }
        self.transform(data, &mut work, &mut scratch);
    }

    fn transform(&self, data: &mut [Complex<T>], work: &mut Buf<T>, scratch: &mut Buf<T>) {
        if self.levels == 1 {
            self.kernel.transform(data, work, scratch);
        } else {
            self.kernel.transform_2d(data, work, scratch);
        }
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), x.len())?;
        let mut data: Buf<T> = x.iter().map(|&v| Complex::from(v)).collect();
        self.apply_spectral(&mut data, Complex::from);
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

/// Strang circulant approximation, diagonalised by the DFT.
#[derive(Clone, Debug)]
pub struct CirculantOp<T: Real> {
    levels: usize,
    side: usize,
    eigs: Vec<Complex<T>>,
    fourier: Fourier<T>,
}

impl<T: Real> CirculantOp<T> {
    pub fn from_toeplitz(op: &ToeplitzOp<T>, kind: CirculantKind) -> Result<Self> {
        let m = op.size();
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "M",
                reason: "circulant approximation needs M >= 2".into(),
            });
        }
        let fourier = Fourier::new(m);
        let mut eigs: Buf<T> = op.circulant_column(kind).into_iter().map(Complex::from).collect();
        fourier.forward(&mut eigs, &mut Vec::new());
        Ok(Self {
            levels: 1,
            side: m,
            eigs,
            fourier,
        })
    }

    /// `Ĉ = I ⊗ C_x + C_y ⊗ I`.
    pub fn from_toeplitz2(op: &Toeplitz2Op<T>, kind: CirculantKind) -> Result<Self> {
        let cx = Self::from_toeplitz(op.tx(), kind)?;
        let cy = Self::from_toeplitz(op.ty(), kind)?;
        let m = op.side();
        let mut eigs = Vec::with_capacity(m * m);
        for k in 0..m {
            for j in 0..m {
                eigs.push(cx.eigs[j] + cy.eigs[k]);
            }
        }
        Ok(Self {
            levels: 2,
            side: m,
            eigs,
            fourier: cx.fourier,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.eigs.len()
    }

    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigs
    }

    /// `data ← F⁻¹ diag(f(γ)) F data` with `F` the (multi-level) DFT.
    pub fn apply_spectral(&self, data: &mut [Complex<T>], f: impl Fn(Complex<T>) -> Complex<T>) {
        debug_assert_eq!(data.len(), self.dim());
        let mut scratch = Vec::new();
        if self.levels == 1 {
            self.fourier.forward(data, &mut scratch);
        } else {
            self.fourier.forward_2d(data, &mut scratch);
        }
        let inv = T::one() / T::of_usize(self.dim());
        for (v, &g) in data.iter_mut().zip(&self.eigs) {
            *v = *v * f(g) * inv;
        }
        if self.levels == 1 {
            self.fourier.inverse(data, &mut scratch);
        } else {
            self.fourier.inverse_2d(data, &mut scratch);
        }
    }

    /// Unnormalised forward (multi-level) DFT.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        let mut scratch = Vec::new();
        if self.levels == 1 {
            self.fourier.forward(data, &mut scratch);
        } else {
            self.fourier.forward_2d(data, &mut scratch);
        }
    }

    /// Inverse (multi-level) DFT including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        let mut scratch = Vec::new();
        if self.levels == 1 {
            self.fourier.inverse(data, &mut scratch);
        } else {
            self.fourier.inverse_2d(data, &mut scratch);
        }
        let inv = T::one() / T::of_usize(self.dim());
        for v in data.iter_mut() {
            *v *= inv;
        }
    }

    pub fn apply_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.dim(), x.len())?;
        let mut data = x.to_vec();
        self.apply_spectral(&mut data, |g| g);
        Ok(data)
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let data: Buf<T> = x.iter().map(|&v| Complex::from(v)).collect();
        Ok(self.apply_complex(&data)?.into_iter().map(|c| c.re).collect())
    }

    pub fn side(&self) -> usize {
        self.side
    }
}

/// Nonnegative diagonal `D_d = ρ Δt diag(|u|²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalBlock<T> {
    d: Vec<T>,
    lambda_max: T,
}

impl<T: Real> DiagonalBlock<T> {
    pub fn new(d: Vec<T>) -> Result<Self> {
        if let Some(bad) = d.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "D",
                reason: format!("diagonal entries must be finite and nonnegative, found {bad}"),
            });
        }
        let lambda_max = d.iter().copied().fold(T::zero(), T::max);
        Ok(Self { d, lambda_max })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            d: vec![T::zero(); n],
            lambda_max: T::zero(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.d.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    #[inline]
    pub fn entries(&self) -> &[T] {
        &self.d
    }

    #[inline]
    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            d: self.d.iter().map(|&v| v * factor).collect(),
            lambda_max: self.lambda_max * factor,
        }
    }
}
