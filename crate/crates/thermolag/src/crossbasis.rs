//! Distributed-lag crossbasis for a binary exposure.
//!
//! The exposure dimension is linear (the 0/1 event indicator enters as-is);
//! the lag dimension is a natural cubic spline over integer lags
//! `0..=max_lag` plus a leading constant column, so lag effects need not
//! vanish anywhere. The design block is the lag-convolution
//! `Z[t, j] = sum_l x_{t-l} B[l, j]`, and the cumulative contrast is the
//! column-sum vector of `B`: for a coefficient subvector `theta` on the
//! crossbasis columns, `c . theta` is the log cumulative relative risk of a
//! sustained unit exposure.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantile::quantile_sorted;
use crate::real::{real, real_usize, Real};
use crate::spline::NsBasis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CrossbasisError {
    #[error("invalid lag spec: {0}")]
    InvalidSpec(String),
    #[error("series too short: need more than {max_lag} days, got {got}")]
    SeriesTooShort { max_lag: usize, got: usize },
}

/// Lag window and lag-spline dimension. Defaults follow the two event kinds:
/// 10 lag days with 4 df for heat waves, 27 lag days with 3 df for cold
/// spells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub max_lag: usize,
    pub lag_df: usize,
}

impl LagSpec {
    pub fn new(max_lag: usize, lag_df: usize) -> Result<Self, CrossbasisError> {
        let spec = Self { max_lag, lag_df };
        spec.validate()?;
        Ok(spec)
    }

    pub fn heat_default() -> Self {
        Self {
            max_lag: 10,
            lag_df: 4,
        }
    }

    pub fn cold_default() -> Self {
        Self {
            max_lag: 27,
            lag_df: 3,
        }
    }

    pub fn validate(&self) -> Result<(), CrossbasisError> {
        if self.lag_df == 0 {
            return Err(CrossbasisError::InvalidSpec("lag_df must be >= 1".into()));
        }
        if self.lag_df > self.max_lag + 1 {
            return Err(CrossbasisError::InvalidSpec(format!(
                "lag_df = {} exceeds max_lag + 1 = {}",
                self.lag_df,
                self.max_lag + 1
            )));
        }
        Ok(())
    }
}

/// Interior-knot placement rule for the lag spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagKnots {
    /// Equally spaced quantiles of the integer lag grid (equally spaced lags).
    #[default]
    Linear,
    /// Equally spaced on the log(1 + lag) scale.
    Log,
}

/// Lag-spline basis evaluated on the integer lag grid.
#[derive(Debug, Clone)]
pub struct LagBasis<R: Real> {
    pub spec: LagSpec,
    pub knot_rule: LagKnots,
    /// `(max_lag + 1) x lag_df`; row `l` holds the basis at integer lag `l`.
    pub matrix: Array2<R>,
    /// Interior knots on the lag scale (empty for lag_df <= 2).
    pub interior_knots: Vec<R>,
    ns: Option<NsBasis<R>>,
}

impl<R: Real> LagBasis<R> {
    /// Basis functions at a (possibly fractional) lag.
    pub fn eval(&self, lag: R) -> Vec<R> {
        let mut row = Vec::with_capacity(self.spec.lag_df);
        row.push(R::one());
        if let Some(ns) = &self.ns {
            row.extend(ns.eval(lag));
        }
        row
    }
}

/// Build the lag basis: a constant column plus `lag_df - 1` natural-spline
/// columns with boundary knots at 0 and `max_lag`.
pub fn build_lag_basis<R: Real>(
    spec: LagSpec,
    knot_rule: LagKnots,
) -> Result<LagBasis<R>, CrossbasisError> {
    spec.validate()?;
    let rows = spec.max_lag + 1;
    let (ns, interior_knots) = if spec.lag_df == 1 {
        (None, Vec::new())
    } else {
        let ns_df = spec.lag_df - 1;
        let interior = interior_lag_knots::<R>(spec.max_lag, ns_df, knot_rule);
        let ns = NsBasis::from_knots((R::zero(), real_usize::<R>(spec.max_lag)), interior.clone())
            .map_err(|e| CrossbasisError::InvalidSpec(e.to_string()))?;
        (Some(ns), interior)
    };
    let mut matrix = Array2::zeros((rows, spec.lag_df));
    for l in 0..rows {
        matrix[[l, 0]] = R::one();
        if let Some(ns) = &ns {
            for (j, v) in ns.eval(real_usize::<R>(l)).into_iter().enumerate() {
                matrix[[l, j + 1]] = v;
            }
        }
    }
    Ok(LagBasis {
        spec,
        knot_rule,
        matrix,
        interior_knots,
        ns,
    })
}

fn interior_lag_knots<R: Real>(max_lag: usize, ns_df: usize, rule: LagKnots) -> Vec<R> {
    let grid: Vec<R> = (0..=max_lag).map(real_usize::<R>).collect();
    (1..ns_df)
        .map(|i| {
            let frac = i as f64 / ns_df as f64;
            match rule {
                LagKnots::Linear => quantile_sorted(&grid, 100.0 * frac),
                LagKnots::Log => {
                    let log_span = ((max_lag + 1) as f64).ln();
                    real::<R>((frac * log_span).exp() - 1.0)
                }
            }
        })
        .collect()
}

/// Crossbasis block ready to drop into a design matrix.
#[derive(Debug, Clone)]
pub struct CrossBasis<R: Real> {
    pub lag_basis: LagBasis<R>,
    /// `(n - max_lag) x lag_df`; row 0 corresponds to series day `max_lag`.
    pub design_block: Array2<R>,
    pub cumulative_contrast: Array1<R>,
    /// Leading days without a complete lag window, excluded from the fit.
    pub dropped_prefix: usize,
}

impl<R: Real> CrossBasis<R> {
    pub fn spec(&self) -> LagSpec {
        self.lag_basis.spec
    }

    /// Serializable description embedded in fit-result output.
    pub fn meta(&self) -> CrossBasisMeta {
        CrossBasisMeta {
            max_lag: self.spec().max_lag,
            lag_df: self.spec().lag_df,
            lag_knots: self.lag_basis.knot_rule,
            interior_knots: self
                .lag_basis
                .interior_knots
                .iter()
                .map(|k| k.to_f64().expect("finite knot"))
                .collect(),
            cumulative_contrast: self
                .cumulative_contrast
                .iter()
                .map(|c| c.to_f64().expect("finite contrast"))
                .collect(),
        }
    }
}

/// Crossbasis metadata recorded alongside every fit result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossBasisMeta {
    pub max_lag: usize,
    pub lag_df: usize,
    pub lag_knots: LagKnots,
    pub interior_knots: Vec<f64>,
    pub cumulative_contrast: Vec<f64>,
}

/// Convolve a 0/1 exposure series with the lag basis.
pub fn build_crossbasis<R: Real>(
    flags: &[bool],
    spec: LagSpec,
    knot_rule: LagKnots,
) -> Result<CrossBasis<R>, CrossbasisError> {
    let n = flags.len();
    if n <= spec.max_lag {
        return Err(CrossbasisError::SeriesTooShort {
            max_lag: spec.max_lag,
            got: n,
        });
    }
    let lag_basis = build_lag_basis::<R>(spec, knot_rule)?;
    let b = &lag_basis.matrix;
    let n_eff = n - spec.max_lag;
    let mut design_block = Array2::zeros((n_eff, spec.lag_df));
    for t in spec.max_lag..n {
        let row = t - spec.max_lag;
        for l in 0..=spec.max_lag {
            if flags[t - l] {
                for j in 0..spec.lag_df {
                    design_block[[row, j]] += b[[l, j]];
                }
            }
        }
    }
    let cumulative_contrast = b.sum_axis(ndarray::Axis(0));
    Ok(CrossBasis {
        lag_basis,
        design_block,
        cumulative_contrast,
        dropped_prefix: spec.max_lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky_lower;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_flags(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<bool> {
        (0..n).map(|_| rng.random_bool(p)).collect()
    }

    /// Explicit lag-expansion oracle: `X_lagged[t, l] = flags[t - l]`.
    fn brute_force_block(flags: &[bool], b: &Array2<f64>, max_lag: usize) -> Array2<f64> {
        let n = flags.len();
        let mut x_lagged = Array2::zeros((n, max_lag + 1));
        for t in 0..n {
            for l in 0..=max_lag {
                if t >= l && flags[t - l] {
                    x_lagged[[t, l]] = 1.0;
                }
            }
        }
        let full = x_lagged.dot(b);
        full.slice(ndarray::s![max_lag.., ..]).to_owned()
    }

    #[test]
    fn constant_lag_basis_is_moving_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = LagSpec::new(10, 1).unwrap();
        let flags = random_flags(&mut rng, 60, 0.3);
        let cb = build_crossbasis::<f64>(&flags, spec, LagKnots::Linear).unwrap();
        assert_eq!(cb.lag_basis.matrix.ncols(), 1);
        for t in 10..60 {
            let window: f64 = (0..=10).filter(|l| flags[t - l]).count() as f64;
            assert_abs_diff_eq!(cb.design_block[[t - 10, 0]], window, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(cb.cumulative_contrast[0], 11.0, epsilon = 1e-12);
    }

    #[test]
    fn heat_default_shape_and_rank() {
        let basis = build_lag_basis::<f64>(LagSpec::heat_default(), LagKnots::Linear).unwrap();
        assert_eq!(basis.matrix.nrows(), 11);
        assert_eq!(basis.matrix.ncols(), 4);
        // independent rank check: the Gram matrix must be positive definite
        let gram = basis.matrix.t().dot(&basis.matrix);
        assert!(
            cholesky_lower(&gram).is_some(),
            "lag basis is rank deficient"
        );
    }

    #[test]
    fn fractional_lags_are_c2() {
        let basis = build_lag_basis::<f64>(LagSpec::heat_default(), LagKnots::Linear).unwrap();
        let h = 1e-4;
        for lag in [0.5, 2.9, 3.4, 6.0, 9.5] {
            for j in 0..4 {
                let f = |t: f64| basis.eval(t)[j];
                let d2 = (f(lag + h) - 2.0 * f(lag) + f(lag - h)) / (h * h);
                assert!(d2.is_finite());
                // C2: the two one-sided second differences agree
                let d2_left = (f(lag) - 2.0 * f(lag - h) + f(lag - 2.0 * h)) / (h * h);
                assert_abs_diff_eq!(d2, d2_left, epsilon = 1e-2);
            }
        }
        // integer rows of the matrix match direct evaluation
        for l in 0..=10usize {
            let row = basis.eval(l as f64);
            for j in 0..4 {
                assert_abs_diff_eq!(basis.matrix[[l, j]], row[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn all_zero_flags_give_zero_block() {
        let flags = vec![false; 40];
        let cb =
            build_crossbasis::<f64>(&flags, LagSpec::heat_default(), LagKnots::Linear).unwrap();
        assert!(cb.design_block.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_impulse_reproduces_basis_rows() {
        let mut flags = vec![false; 50];
        let t0 = 17;
        flags[t0] = true;
        let spec = LagSpec::heat_default();
        let cb = build_crossbasis::<f64>(&flags, spec, LagKnots::Linear).unwrap();
        for t in spec.max_lag..50 {
            let row = t - spec.max_lag;
            for j in 0..spec.lag_df {
                let expect = if t >= t0 && t - t0 <= spec.max_lag {
                    cb.lag_basis.matrix[[t - t0, j]]
                } else {
                    0.0
                };
                assert_abs_diff_eq!(cb.design_block[[row, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matches_brute_force_lag_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for &(max_lag, lag_df) in &[(10usize, 4usize), (27, 3), (7, 2), (21, 4), (0, 1)] {
            let spec = LagSpec::new(max_lag, lag_df).unwrap();
            let n = 200;
            let flags = random_flags(&mut rng, n, 0.25);
            let cb = build_crossbasis::<f64>(&flags, spec, LagKnots::Linear).unwrap();
            let oracle = brute_force_block(&flags, &cb.lag_basis.matrix, max_lag);
            assert_eq!(cb.design_block.dim(), oracle.dim());
            for (a, b) in cb.design_block.iter().zip(oracle.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn contrast_is_column_sums_for_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let max_lag = rng.random_range(1..30usize);
            let lag_df = rng.random_range(1..=(max_lag + 1).min(5));
            let basis =
                build_lag_basis::<f64>(LagSpec::new(max_lag, lag_df).unwrap(), LagKnots::Linear)
                    .unwrap();
            let sums = basis.matrix.sum_axis(ndarray::Axis(0));
            let flags: Vec<bool> = (0..max_lag + 5).map(|_| rng.random_bool(0.5)).collect();
            let cb = build_crossbasis::<f64>(&flags, basis.spec, LagKnots::Linear).unwrap();
            for j in 0..lag_df {
                assert_eq!(cb.cumulative_contrast[j], sums[j]);
            }
        }
    }

    #[test]
    fn uniform_lag_curve_recovers_total_rr() {
        // theta chosen by least squares so B theta equals a flat lag curve
        // distributing log(1.5) over the window
        let spec = LagSpec::heat_default();
        let basis = build_lag_basis::<f64>(spec, LagKnots::Linear).unwrap();
        let target = ndarray::Array1::from_elem(spec.max_lag + 1, 1.5f64.ln() / 11.0);
        let sol = crate::linalg::least_squares(&basis.matrix, &target).unwrap();
        let c = basis.matrix.sum_axis(ndarray::Axis(0));
        let log_rr: f64 = c.dot(&sol.beta);
        assert_abs_diff_eq!(log_rr.exp(), 1.5, epsilon = 1e-9);
        // null effect: theta = 0 gives RR exactly 1
        let zero = ndarray::Array1::zeros(spec.lag_df);
        assert_eq!(c.dot(&zero).exp(), 1.0);
    }

    #[test]
    fn shifting_exposure_shifts_design_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = LagSpec::new(5, 3).unwrap();
        let n = 80;
        let k = 7;
        let base = random_flags(&mut rng, n - k, 0.3);
        let mut shifted = vec![false; k];
        shifted.extend(base.iter().copied());
        let mut padded = base.clone();
        padded.extend(std::iter::repeat_n(false, k));

        let cb_a = build_crossbasis::<f64>(&padded, spec, LagKnots::Linear).unwrap();
        let cb_b = build_crossbasis::<f64>(&shifted, spec, LagKnots::Linear).unwrap();
        // interior rows: row t of the shifted series equals row t - k of the original
        for t in (spec.max_lag + k)..(n - k) {
            for j in 0..spec.lag_df {
                assert_abs_diff_eq!(
                    cb_b.design_block[[t - spec.max_lag, j]],
                    cb_a.design_block[[t - k - spec.max_lag, j]],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn series_too_short_is_rejected() {
        let flags = vec![true; 10];
        let err =
            build_crossbasis::<f64>(&flags, LagSpec::heat_default(), LagKnots::Linear).unwrap_err();
        assert_eq!(
            err,
            CrossbasisError::SeriesTooShort {
                max_lag: 10,
                got: 10
            }
        );
        assert!(LagSpec::new(3, 5).is_err());
    }

    #[test]
    fn log_knots_are_log_spaced() {
        let basis = build_lag_basis::<f64>(LagSpec::new(27, 4).unwrap(), LagKnots::Log).unwrap();
        assert_eq!(basis.interior_knots.len(), 2);
        let log_span = 28.0f64.ln();
        assert_abs_diff_eq!(
            basis.interior_knots[0],
            (log_span / 3.0).exp() - 1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            basis.interior_knots[1],
            (2.0 * log_span / 3.0).exp() - 1.0,
            epsilon = 1e-12
        );
    }
}
