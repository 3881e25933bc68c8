use proptest::prelude::*;
use rfnse_core::{centered_coeffs, tail_bound, Coeffs, FractionalOrder};
use statrs::function::gamma::{gamma, ln_gamma};

/// `(-1)^k Γ(α+1) / (Γ(α/2−k+1) Γ(α/2+k+1))`, with the negative-argument
/// gamma taken through the reflection formula in log space.
fn direct(alpha: f64, k: usize) -> f64 {
    let a = alpha / 2.0 - k as f64 + 1.0;
    let b = alpha / 2.0 + k as f64 + 1.0;
    if k <= 20 {
        return (-1f64).powi(k as i32) * gamma(alpha + 1.0) / (gamma(a) * gamma(b));
    }
    // Γ(a) = π / (sin(πa) Γ(1−a)) for a < 0.
    let pi = std::f64::consts::PI;
    let sin = (pi * a).sin();
    let log_mag = ln_gamma(alpha + 1.0) + ln_gamma(1.0 - a) - ln_gamma(b) - pi.ln() + sin.abs().ln();
    (-1f64).powi(k as i32) * sin.signum() * log_mag.exp()
}

#[test]
fn invariants_on_alpha_grid() {
    for i in 1..=20 {
        let alpha = 1.0 + 0.05 * i as f64;
        let c: Coeffs = centered_coeffs(FractionalOrder::new(alpha).unwrap(), 10_000).unwrap();
        let v = c.as_slice();
        assert!(v[0] > 0.0);
        let mut partial = v[0];
        for k in 1..v.len() {
            if alpha < 2.0 {
                assert!(v[k] < 0.0, "alpha={alpha} k={k}");
                assert!(v[k].abs() < v[k - 1].abs(), "alpha={alpha} k={k}");
            }
            partial += 2.0 * v[k];
        }
        assert!(partial >= 0.0, "alpha={alpha}");
    }
}

#[test]
fn recurrence_matches_gamma_form() {
    for alpha in [1.05, 1.2, 1.37, 1.5, 1.8, 1.95] {
        let c: Coeffs = centered_coeffs(FractionalOrder::new(alpha).unwrap(), 170).unwrap();
        for k in 0..=170 {
            let d = direct(alpha, k);
            let rel = (c.get(k) - d).abs() / d.abs();
            assert!(rel <= 1e-12, "alpha={alpha} k={k} rel={rel:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_sum_inside_bracket(alpha in 1.01f64..1.99, k0 in 3usize..400) {
        let order = FractionalOrder::new(alpha).unwrap();
        let c: Coeffs = centered_coeffs(order, k0 + 1).unwrap();
        let (lo, hi) = tail_bound(order, k0).unwrap();
        let tail = c.tail_sum(k0);
        prop_assert!(lo < tail && tail < hi, "{lo} < {tail} < {hi}");
    }

    #[test]
    fn coefficient_sum_tends_to_zero(alpha in 1.01f64..1.99) {
        let c: Coeffs = centered_coeffs(FractionalOrder::new(alpha).unwrap(), 1).unwrap();
        prop_assert!((c.tail_sum(0) - c.get(0) / 2.0).abs() <= 1e-15 * c.get(0));
    }

    #[test]
    fn out_of_range_orders_are_rejected(alpha in prop_oneof![-5.0f64..1.0, 2.0001f64..10.0]) {
        prop_assert!(FractionalOrder::new(alpha).is_err());
    }
}
