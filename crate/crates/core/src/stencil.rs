//! Fractional centred-difference coefficients for the Riesz derivative.
//!
//! The coefficients are
//!
//! ```text
//! c_k = (-1)^k Γ(α+1) / (Γ(α/2 - k + 1) Γ(α/2 + k + 1)),   k = 0, 1, 2, ...
//! ```
//!
//! and are generated with the ratio recurrence
//! `c_{k+1} = c_k (k - α/2) / (k + 1 + α/2)`, which never touches the poles of
//! Γ at non-positive integers and does not overflow for large `k`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Order of the Riesz derivative, `1 < α ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 1.0 && alpha <= 2.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidOrder(alpha))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `true` at the classical end point, where the stencil is `[-1, 2, -1]`.
    #[inline]
    pub fn is_laplacian(self) -> bool {
        self.0 == 2.0
    }

    /// `c_0 = Γ(α+1) / Γ(α/2+1)²`.
    pub fn c0(self) -> f64 {
        let a = self.0;
        gamma(a + 1.0) / gamma(a / 2.0 + 1.0).powi(2)
    }

    /// Constant `θ` of the lower tail estimate.
    pub fn theta(self) -> f64 {
        let a = self.0;
        let p = 5.0 + a / 2.0;
        (1.0 - (1.0 + a) / p).powf(p) * (1.0 + a).exp() * gamma(a + 1.0) * (PI * a / 2.0).sin()
            / (PI * a)
    }

    /// Constant `θ₀` of the upper tail estimate.
    pub fn theta0(self) -> f64 {
        let a = self.0;
        2f64.sqrt() * (13.0f64 / 12.0).exp() * gamma(a + 1.0) * (PI * a / 2.0).sin() / (PI * a)
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

/// The sequence `c_0, ..., c_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilCoeffs<T> {
    alpha: FractionalOrder,
    coeffs: Vec<T>,
}

impl<T: Real> StencilCoeffs<T> {
    #[inline]
    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    /// Largest lag `K`.
    #[inline]
    pub fn max_lag(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.coeffs
    }

    /// `c_k`, or zero beyond the stored range.
    #[inline]
    pub fn get(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    /// `Σ_{j > k0} |c_j|`, evaluated exactly through the identity
    /// `Σ_{j ≥ 1} |c_j| = c_0 / 2` so no truncation of the infinite tail occurs.
    pub fn tail_sum(&self, k0: usize) -> f64 {
        let c0 = self.alpha.c0();
        let head: f64 = (1..=k0).map(|k| self.get(k).to_f64_lossy().abs()).sum();
        c0 / 2.0 - head
    }
}

/// Coefficients `c_0..c_K` for the given order.
pub fn centered_coeffs<T: Real>(alpha: FractionalOrder, max_lag: usize) -> Result<StencilCoeffs<T>> {
    if max_lag < 1 {
        return Err(Error::InvalidParameter {
            name: "K",
            reason: format!("need at least one lag, got {max_lag}"),
        });
    }
    let mut coeffs = Vec::with_capacity(max_lag + 1);
    if alpha.is_laplacian() {
        coeffs.push(T::of(2.0));
        coeffs.push(T::of(-1.0));
        coeffs.resize(max_lag + 1, T::zero());
    } else {
        let half = alpha.value() / 2.0;
        let mut c = alpha.c0();
        coeffs.push(T::of(c));
        for k in 0..max_lag {
            let k = k as f64;
            c *= (k - half) / (k + 1.0 + half);
            coeffs.push(T::of(c));
        }
    }
    Ok(StencilCoeffs { alpha, coeffs })
}

/// Bracket `(θ/(k0+1/2)^α, θ₀/(k0-1)^α)` around `Σ_{j>k0} |c_j|`.
pub fn tail_bound(alpha: FractionalOrder, k0: usize) -> Result<(f64, f64)> {
    if k0 < 3 {
        return Err(Error::InvalidParameter {
            name: "k0",
            reason: format!("tail estimate needs k0 >= 3, got {k0}"),
        });
    }
    let a = alpha.value();
    let k = k0 as f64;
    Ok((alpha.theta() / (k + 0.5).powf(a), alpha.theta0() / (k - 1.0).powf(a)))
}

/// Memo of coefficient sequences keyed by `(α, K)`.
///
/// Operators of different sizes built from the same order share one entry
/// when they ask for the same `K`.
#[derive(Debug, Default)]
pub struct StencilCache<T> {
    entries: Mutex<HashMap<(u64, usize), Arc<StencilCoeffs<T>>>>,
}

impl<T: Real> StencilCache<T> {
    pub fn new() -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, alpha: FractionalOrder, max_lag: usize) -> Result<Arc<StencilCoeffs<T>>> {
        let key = (alpha.value().to_bits(), max_lag);
        let mut map = self.entries.lock().expect("stencil cache poisoned");
        if let Some(hit) = map.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(centered_coeffs(alpha, max_lag)?);
        map.insert(key, Arc::clone(&fresh));
        Ok(fresh)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("stencil cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
