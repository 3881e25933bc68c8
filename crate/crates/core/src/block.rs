//! Real 2×2 block form of `(D − T + iI)u = b`.
//!
//! With `u = y + iz` and `b = p + iq` the system reads
//!
//! ```text
//! [ I     T−D ] [z]   [−p]
//! [ D−T   I   ] [y] = [ q]
//! ```
//!
//! and splits as `R = 𝒯 + 𝒟` with `𝒯 = [[0, T], [−T, 0]]` and
//! `𝒟 = [[I, −D], [D, I]]`.

use num_complex::Complex;

use crate::error::{check_len, Result};
use crate::scalar::Real;
use crate::structured::{DiagonalBlock, FractionalToeplitz};

/// Pair of real halves `[z; y]` for the complex field `u = y + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    pub z: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> BlockVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            z: vec![T::zero(); n],
            y: vec![T::zero(); n],
        }
    }

    pub fn new(z: Vec<T>, y: Vec<T>) -> Result<Self> {
        check_len(z.len(), y.len())?;
        Ok(Self { z, y })
    }

    /// `[z; y]` from a flat vector of length `2n`.
    pub fn from_flat(x: &[T]) -> Self {
        let n = x.len() / 2;
        Self {
            z: x[..n].to_vec(),
            y: x[n..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.half());
        out.extend_from_slice(&self.z);
        out.extend_from_slice(&self.y);
        out
    }

    /// Length of each half.
    #[inline]
    pub fn half(&self) -> usize {
        self.z.len()
    }

    /// Maps the right-hand side `b = p + iq` to `[−p; q]`.
    pub fn embed(b: &[Complex<T>]) -> Self {
        Self {
            z: b.iter().map(|c| -c.re).collect(),
            y: b.iter().map(|c| c.im).collect(),
        }
    }

    /// Maps an unknown `u = y + iz` to `[z; y]`.
    pub fn from_unknown(u: &[Complex<T>]) -> Self {
        Self {
            z: u.iter().map(|c| c.im).collect(),
            y: u.iter().map(|c| c.re).collect(),
        }
    }

    /// Maps a solution `[z; y]` back to `u = y + iz`.
    pub fn lift(&self) -> Vec<Complex<T>> {
        self.y
            .iter()
            .zip(&self.z)
            .map(|(&re, &im)| Complex::new(re, im))
            .collect()
    }

    pub fn norm(&self) -> T {
        (crate::scalar::dot(&self.z, &self.z) + crate::scalar::dot(&self.y, &self.y)).sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        crate::scalar::dot(&self.z, &other.z) + crate::scalar::dot(&self.y, &other.y)
    }
}

/// Real block system `R x = f` for one time level.
#[derive(Debug, Clone)]
pub struct BlockSystem<T: Real> {
    t: FractionalToeplitz<T>,
    d: DiagonalBlock<T>,
    f: BlockVector<T>,
}

impl<T: Real> BlockSystem<T> {
    pub fn new(t: FractionalToeplitz<T>, d: DiagonalBlock<T>, f: BlockVector<T>) -> Result<Self> {
        check_len(t.dim(), d.len())?;
        check_len(t.dim(), f.half())?;
        check_len(t.dim(), f.y.len())?;
        Ok(Self { t, d, f })
    }

    /// System for the complex right-hand side `b`.
    pub fn from_complex(t: FractionalToeplitz<T>, d: DiagonalBlock<T>, b: &[Complex<T>]) -> Result<Self> {
        Self::new(t, d, BlockVector::embed(b))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    pub fn toeplitz(&self) -> &FractionalToeplitz<T> {
        &self.t
    }

    pub fn diagonal(&self) -> &DiagonalBlock<T> {
        &self.d
    }

    pub fn rhs(&self) -> &BlockVector<T> {
        &self.f
    }

    pub fn with_rhs(&self, f: BlockVector<T>) -> Result<Self> {
        Self::new(self.t.clone(), self.d.clone(), f)
    }

    fn t_pair(&self, x: &BlockVector<T>) -> (Vec<T>, Vec<T>) {
        let n = self.dim();
        let mut tz = vec![T::zero(); n];
        let mut ty = vec![T::zero(); n];
        self.t.apply_pair(&x.z, &x.y, &mut tz, &mut ty);
        (tz, ty)
    }

    fn check(&self, x: &BlockVector<T>) -> Result<()> {
        check_len(self.dim(), x.z.len())?;
        check_len(self.dim(), x.y.len())
    }

    /// `R x = [z + (T−D) y; (D−T) z + y]`.
    pub fn apply_r(&self, x: &BlockVector<T>) -> Result<BlockVector<T>> {
        self.check(x)?;
        let (tz, ty) = self.t_pair(x);
        let d = self.d.entries();
        let z = (0..self.dim())
            .map(|i| x.z[i] + ty[i] - d[i] * x.y[i])
            .collect();
        let y = (0..self.dim())
            .map(|i| d[i] * x.z[i] - tz[i] + x.y[i])
            .collect();
        Ok(BlockVector { z, y })
    }

    /// `𝒯 x = [T y; −T z]`.
    pub fn apply_t_block(&self, x: &BlockVector<T>) -> Result<BlockVector<T>> {
        self.check(x)?;
        let (tz, ty) = self.t_pair(x);
        Ok(BlockVector {
            z: ty,
            y: tz.into_iter().map(|v| -v).collect(),
        })
    }

    /// `𝒟 x = [z − D y; D z + y]`.
    pub fn apply_d_block(&self, x: &BlockVector<T>) -> Result<BlockVector<T>> {
        self.check(x)?;
        let d = self.d.entries();
        Ok(BlockVector {
            z: (0..self.dim()).map(|i| x.z[i] - d[i] * x.y[i]).collect(),
            y: (0..self.dim()).map(|i| d[i] * x.z[i] + x.y[i]).collect(),
        })
    }

    /// Relative residual `‖f − R x‖ / ‖f‖` (absolute when `f = 0`).
    pub fn relative_residual(&self, x: &BlockVector<T>) -> Result<T> {
        let rx = self.apply_r(x)?;
        let mut s = T::zero();
        for i in 0..self.dim() {
            let a = self.f.z[i] - rx.z[i];
            let b = self.f.y[i] - rx.y[i];
            s += a * a + b * b;
        }
        let nf = self.f.norm();
        let nr = s.sqrt();
        Ok(if nf > T::zero() { nr / nf } else { nr })
    }
}
