//! Orthogonal sine transform (DST-I) and the complex FFT plumbing used by the
//! structured operators.
//!
//! The sine transform matrix is `S[i, j] = sqrt(2/(M+1)) sin(π i j / (M+1))`
//! for `1 ≤ i, j ≤ M`; it is symmetric and `S·S = I`. It is evaluated with
//! one complex FFT of length `M + 1`. Complex inputs are transformed in one
//! pass (real and imaginary parts are two independent real transforms), which
//! is how callers get two real transforms for the price of one FFT.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};
use crate::scalar::Real;

/// Forward/inverse complex FFT pair of a fixed length with per-call scratch.
#[derive(Clone)]
pub struct Fourier<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fourier<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("len", &self.len).finish()
    }
}

impl<T: Real> Fourier<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalised forward DFT of every consecutive chunk of `len` entries.
    pub fn forward(&self, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        run(&*self.forward, data, scratch);
    }

    /// Unnormalised inverse DFT (no `1/len` factor).
    pub fn inverse(&self, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        run(&*self.inverse, data, scratch);
    }

    /// Forward DFT along both axes of an `len × len` column-major field.
    pub fn forward_2d(&self, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        self.forward(data, scratch);
        transpose_square(data, self.len);
        self.forward(data, scratch);
        transpose_square(data, self.len);
    }

    pub fn inverse_2d(&self, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        self.inverse(data, scratch);
        transpose_square(data, self.len);
        self.inverse(data, scratch);
        transpose_square(data, self.len);
    }
}

fn run<T: Real>(fft: &dyn Fft<T>, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
    let need = fft.get_inplace_scratch_len();
    if scratch.len() < need {
        scratch.resize(need, Complex::default());
    }
    fft.process_with_scratch(data, &mut scratch[..need]);
}

/// In-place transpose of a square column-major `m × m` array.
pub fn transpose_square<V: Copy>(data: &mut [V], m: usize) {
    debug_assert_eq!(data.len(), m * m);
    for j in 0..m {
        for i in (j + 1)..m {
            data.swap(i + j * m, j + i * m);
        }
    }
}

/// Shared, immutable DST-I machinery; every call brings its own buffers.
///
/// With `N = M + 1`, the input is folded into
/// `y_j = sin(πj/N)(x_j + x_{N−j}) + (x_j − x_{N−j})/2` and transformed by one
/// complex FFT of length `N`. The sine part of the result gives the even
/// outputs directly and the cosine part gives differences of consecutive odd
/// outputs.
#[derive(Clone, Debug)]
pub struct SineKernel<T: Real> {
    m: usize,
    fourier: Fourier<T>,
    sines: Vec<T>,
    scale: T,
}

impl<T: Real> SineKernel<T> {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "sine transform needs M >= 1");
        let n = m + 1;
        let nt = T::of_usize(n);
        Self {
            m,
            fourier: Fourier::new(n),
            sines: (0..n).map(|j| (T::PI() * T::of_usize(j) / nt).sin()).collect(),
            scale: (T::of(2.0) / nt).sqrt(),
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.m
    }

    /// Applies `S` to every consecutive chunk of `M` complex entries in place.
    pub fn transform(
        &self,
        data: &mut [Complex<T>],
        work: &mut Vec<Complex<T>>,
        scratch: &mut Vec<Complex<T>>,
    ) {
        let m = self.m;
        let n = m + 1;
        let count = data.len() / m;
        debug_assert_eq!(count * m, data.len());
        let half = T::of(0.5);
        work.clear();
        work.resize(count * n, Complex::default());
        for (x, y) in data.chunks_exact(m).zip(work.chunks_exact_mut(n)) {
            // one-based x_j is x[j - 1]
            for j in 1..n {
                let a = x[j - 1];
                let b = x[n - j - 1];
                y[j] = (a + b) * self.sines[j] + (a - b) * half;
            }
        }
        self.fourier.forward(work, scratch);
        let hs = half * self.scale;
        for (x, y) in data.chunks_exact_mut(m).zip(work.chunks_exact(n)) {
            // F_{2k} = i (Y_k − Y_{N−k}) / 2
            for k in 1..=m / 2 {
                let d = y[k] - y[n - k];
                x[2 * k - 1] = Complex::new(-d.im, d.re) * hs;
            }
            // F_1 = Y_0 / 2, F_{2k+1} = F_{2k−1} + (Y_k + Y_{N−k}) / 2
            let mut acc = y[0] * hs;
            x[0] = acc;
            for k in 1..=(m - 1) / 2 {
                acc += (y[k] + y[n - k]) * hs;
                x[2 * k] = acc;
            }
        }
    }

    /// Applies `S ⊗ S` to an `M × M` column-major complex field in place.
    pub fn transform_2d(
        &self,
        data: &mut [Complex<T>],
        work: &mut Vec<Complex<T>>,
        scratch: &mut Vec<Complex<T>>,
    ) {
        self.transform(data, work, scratch);
        transpose_square(data, self.m);
        self.transform(data, work, scratch);
        transpose_square(data, self.m);
    }
}

/// A sine transform of length `M` that owns its workspace.
///
/// Not meant for simultaneous use from two threads; clone one per thread.
#[derive(Clone, Debug)]
pub struct SineTransformPlan<T: Real> {
    kernel: SineKernel<T>,
    buf: Vec<Complex<T>>,
    work: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> SineTransformPlan<T> {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(crate::Error::InvalidParameter {
                name: "M",
                reason: "sine transform length must be positive".into(),
            });
        }
        Ok(Self {
            kernel: SineKernel::new(m),
            buf: Vec::new(),
            work: Vec::new(),
            scratch: Vec::new(),
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.kernel.m
    }

    pub fn kernel(&self) -> &SineKernel<T> {
        &self.kernel
    }

    /// `S·x`.
    pub fn apply(&mut self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.size(), x.len())?;
        self.load(x);
        self.kernel
            .transform(&mut self.buf, &mut self.work, &mut self.scratch);
        Ok(self.buf.iter().map(|c| c.re).collect())
    }

    /// `(S ⊗ S)·vec(X)` for an `M × M` field stored column-major, i.e. `S·X·S`.
    pub fn apply_2d(&mut self, x: &[T]) -> Result<Vec<T>> {
        let m = self.size();
        check_len(m * m, x.len())?;
        self.load(x);
        self.kernel
            .transform_2d(&mut self.buf, &mut self.work, &mut self.scratch);
        Ok(self.buf.iter().map(|c| c.re).collect())
    }

    /// `S·a` and `S·b` with a single FFT.
    pub fn apply_pair(&mut self, a: &[T], b: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        check_len(self.size(), a.len())?;
        check_len(self.size(), b.len())?;
        self.buf.clear();
        self.buf
            .extend(a.iter().zip(b).map(|(&re, &im)| Complex::new(re, im)));
        self.kernel
            .transform(&mut self.buf, &mut self.work, &mut self.scratch);
        Ok((
            self.buf.iter().map(|c| c.re).collect(),
            self.buf.iter().map(|c| c.im).collect(),
        ))
    }

    fn load(&mut self, x: &[T]) {
        self.buf.clear();
        self.buf.extend(x.iter().map(|&v| Complex::new(v, T::zero())));
    }
}

/// `S[i, j]` with one-based indices, evaluated directly.
pub fn sine_entry<T: Real>(m: usize, i: usize, j: usize) -> T {
    let mp1 = T::of_usize(m + 1);
    (T::of(2.0) / mp1).sqrt() * (T::PI() * T::of_usize(i * j) / mp1).sin()
}

/// `dst_apply` with a throwaway plan.
pub fn dst_apply<T: Real>(x: &[T]) -> Result<Vec<T>> {
    SineTransformPlan::new(x.len())?.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_s(m: usize) -> Vec<Vec<f64>> {
        (1..=m)
            .map(|i| (1..=m).map(|j| sine_entry::<f64>(m, i, j)).collect())
            .collect()
    }

    #[test]
    fn one_point_transform() {
        let y = dst_apply(&[1.0f64]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_column_for_four_points() {
        // sqrt(2/5) sin(pi j / 5), j = 1..4
        let expected = [
            0.3717480344601845,
            0.6015009550075456,
            0.6015009550075457,
            0.37174803446018456,
        ];
        let y = dst_apply(&[1.0f64, 0.0, 0.0, 0.0]).unwrap();
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn fast_path_matches_dense_matrix() {
        for m in [1usize, 2, 3, 7, 16, 33, 64, 100, 255, 256] {
            let s = dense_s(m);
            let x: Vec<f64> = (0..m).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let y = dst_apply(&x).unwrap();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..m {
                let d: f64 = (0..m).map(|j| s[i][j] * x[j]).sum();
                assert!((d - y[i]).abs() <= 1e-12 * nx, "m {m} i {i}");
            }
        }
    }

    #[test]
    fn pair_transform_equals_two_transforms() {
        let mut plan = SineTransformPlan::<f64>::new(9).unwrap();
        let a: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..9).map(|i| (i as f64 * 0.3).cos()).collect();
        let (sa, sb) = plan.apply_pair(&a, &b).unwrap();
        let ea = plan.apply(&a).unwrap();
        let eb = plan.apply(&b).unwrap();
        for i in 0..9 {
            assert!((sa[i] - ea[i]).abs() < 1e-14);
            assert!((sb[i] - eb[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn two_dimensional_transform_of_zero_and_scalar() {
        let mut plan = SineTransformPlan::<f64>::new(1).unwrap();
        let y = plan.apply_2d(&[3.0]).unwrap();
        assert!((y[0] - 3.0).abs() < 1e-15);
        let mut plan = SineTransformPlan::<f64>::new(5).unwrap();
        assert!(plan.apply_2d(&[0.0; 25]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_reported() {
        let mut plan = SineTransformPlan::<f64>::new(4).unwrap();
        assert!(plan.apply(&[1.0; 3]).is_err());
        assert!(plan.apply_2d(&[1.0; 15]).is_err());
        assert!(SineTransformPlan::<f64>::new(0).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let mut v: Vec<usize> = (0..16).collect();
        transpose_square(&mut v, 4);
        assert_eq!(v[1], 4);
        transpose_square(&mut v, 4);
        assert_eq!(v, (0..16).collect::<Vec<_>>());
    }
}
