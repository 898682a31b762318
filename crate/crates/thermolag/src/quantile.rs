//! Shared quantile convention: linear interpolation between order statistics
//! at rank `(n - 1) * p / 100`.
//!
//! Percentile thresholds for event detection and spline knot placement both
//! go through this one estimator so results are bit-reproducible.

use crate::real::{real, Real};

/// Quantile of already-sorted values at percentile `p` in `[0, 100]`.
///
/// Panics if `sorted` is empty; callers gate on non-empty input.
pub fn quantile_sorted<R: Real>(sorted: &[R], p: f64) -> R {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (n - 1) as f64 * p / 100.0;
    let lo = rank.floor().clamp(0.0, (n - 1) as f64) as usize;
    let hi = rank.ceil().clamp(0.0, (n - 1) as f64) as usize;
    let frac: R = real(rank - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Quantile of unsorted values; returns `None` on empty input.
pub fn quantile<R: Real>(values: &[R], p: f64) -> Option<R> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    Some(quantile_sorted(&sorted, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn decile_examples() {
        let temps: Vec<f64> = vec![10., 12., 14., 16., 18., 20., 22., 24., 26., 28.];
        assert_abs_diff_eq!(quantile(&temps, 90.0).unwrap(), 26.2, epsilon = 1e-12);
        assert_abs_diff_eq!(quantile(&temps, 10.0).unwrap(), 11.8, epsilon = 1e-12);
    }

    #[test]
    fn constant_input() {
        let v = vec![20.0_f64; 17];
        for p in [0.0, 3.0, 50.0, 97.5, 100.0] {
            assert_eq!(quantile(&v, p).unwrap(), 20.0);
        }
    }

    #[test]
    fn endpoints_are_min_max() {
        let v = vec![3.0_f64, -1.0, 7.5, 2.0];
        assert_eq!(quantile(&v, 0.0).unwrap(), -1.0);
        assert_eq!(quantile(&v, 100.0).unwrap(), 7.5);
    }

    #[test]
    fn f32_instantiation() {
        let v: Vec<f32> = vec![1.0, 2.0, 3.0];
        assert_abs_diff_eq!(quantile(&v, 50.0).unwrap(), 2.0_f32, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn within_bounds_and_monotone(
            mut v in proptest::collection::vec(-1e3..1e3f64, 1..60),
            p1 in 0.0..100.0f64,
            p2 in 0.0..100.0f64,
        ) {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let qlo = quantile_sorted(&v, lo);
            let qhi = quantile_sorted(&v, hi);
            prop_assert!(qlo >= v[0] - 1e-12 && qhi <= v[v.len() - 1] + 1e-12);
            prop_assert!(qlo <= qhi + 1e-12);
        }
    }
}
