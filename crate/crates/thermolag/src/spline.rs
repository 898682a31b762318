//! Natural cubic spline basis (`ns`).
//!
//! One construction serves every smooth adjustment term in the model:
//! relative humidity, PM10, long-term trend, day-of-season, daily mean
//! temperature, and the lag dimension of the crossbasis.
//!
//! The basis is the truncated-power natural-spline family: with knots
//! k_1 < ... < k_K (boundaries included) the columns are
//!
//! ```text
//!   x,  d_1(x) - d_{K-1}(x),  ...,  d_{K-2}(x) - d_{K-1}(x)
//! ```
//!
//! where `d_j(x) = [(x - k_j)_+^3 - (x - k_K)_+^3] / (k_K - k_j)`. Every
//! column is C^2 inside the boundary interval and exactly linear outside it,
//! so evaluation extrapolates linearly by construction. Inputs are rescaled
//! to [0, 1] over the boundary interval before the cubics are formed; the
//! rescaling is affine and therefore span-preserving, and keeps the design
//! well conditioned for large df.

use thiserror::Error;

use ndarray::Array2;

use crate::quantile::quantile_sorted;
use crate::real::{real, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplineError {
    #[error("spline df must be at least 1")]
    InvalidDf,
    #[error("degenerate input: need at least {needed} distinct values, got {got}")]
    DegenerateInput { needed: usize, got: usize },
    #[error("degenerate knots: sequence must be strictly increasing")]
    DegenerateKnots,
}

/// A fitted natural cubic spline basis with `df` columns (no intercept).
#[derive(Debug, Clone)]
pub struct NsBasis<R: Real> {
    boundary: (R, R),
    /// Interior knots on the original x scale, strictly inside the boundary.
    interior: Vec<R>,
    /// All knots rescaled to the unit interval: 0, interior..., 1.
    knots_u: Vec<R>,
}

impl<R: Real> NsBasis<R> {
    /// Basis from observed data: boundary knots at min/max of `x`, interior
    /// knots at the i/df quantiles of `x` for i = 1..df-1.
    pub fn from_data(x: &[R], df: usize) -> Result<Self, SplineError> {
        if df == 0 {
            return Err(SplineError::InvalidDf);
        }
        let mut sorted: Vec<R> = x.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut distinct = 0usize;
        for (i, v) in sorted.iter().enumerate() {
            if i == 0 || *v != sorted[i - 1] {
                distinct += 1;
            }
        }
        if sorted.is_empty() || distinct < df + 1 {
            return Err(SplineError::DegenerateInput {
                needed: df + 1,
                got: distinct,
            });
        }
        let boundary = (sorted[0], sorted[sorted.len() - 1]);
        let interior: Vec<R> = (1..df)
            .map(|i| quantile_sorted(&sorted, 100.0 * i as f64 / df as f64))
            .collect();
        Self::from_knots(boundary, interior)
    }

    /// Basis from explicit knots; `df = interior.len() + 1`.
    pub fn from_knots(boundary: (R, R), interior: Vec<R>) -> Result<Self, SplineError> {
        let (lo, hi) = boundary;
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(SplineError::DegenerateKnots);
        }
        let span = hi - lo;
        let mut knots_u = Vec::with_capacity(interior.len() + 2);
        knots_u.push(R::zero());
        for k in &interior {
            knots_u.push((*k - lo) / span);
        }
        knots_u.push(R::one());
        if knots_u.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SplineError::DegenerateKnots);
        }
        Ok(Self {
            boundary,
            interior,
            knots_u,
        })
    }

    /// Number of basis columns.
    pub fn df(&self) -> usize {
        self.knots_u.len() - 1
    }

    pub fn boundary_knots(&self) -> (R, R) {
        self.boundary
    }

    pub fn interior_knots(&self) -> &[R] {
        &self.interior
    }

    #[inline]
    fn to_unit(&self, x0: R) -> R {
        (x0 - self.boundary.0) / (self.boundary.1 - self.boundary.0)
    }

    /// Basis function values at `x0`, defined for every real input
    /// (linear continuation beyond the boundary knots).
    pub fn eval(&self, x0: R) -> Vec<R> {
        self.eval_derivative(x0, 0)
    }

    /// First derivative of each basis function at `x0`.
    pub fn eval_d1(&self, x0: R) -> Vec<R> {
        self.eval_derivative(x0, 1)
    }

    /// Second derivative of each basis function at `x0`.
    pub fn eval_d2(&self, x0: R) -> Vec<R> {
        self.eval_derivative(x0, 2)
    }

    fn eval_derivative(&self, x0: R, order: u8) -> Vec<R> {
        let u = self.to_unit(x0);
        let span = self.boundary.1 - self.boundary.0;
        // d/dx = (1/span) d/du per derivative order
        let scale = match order {
            0 => R::one(),
            1 => span.recip(),
            2 => (span * span).recip(),
            _ => unreachable!(),
        };
        let df = self.df();
        let ks = &self.knots_u;
        let last = ks[ks.len() - 1];
        let common = ks[ks.len() - 2];
        let mut out = Vec::with_capacity(df);
        out.push(match order {
            0 => u,
            1 => R::one(),
            _ => R::zero(),
        });
        if df > 1 {
            let d_common = dfun(common, last, u, order);
            for &knot in &ks[..df - 1] {
                out.push(dfun(knot, last, u, order) - d_common);
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// Design matrix: one row per input value, `df` columns.
    pub fn design(&self, xs: &[R]) -> Array2<R> {
        let mut m = Array2::zeros((xs.len(), self.df()));
        for (i, &x0) in xs.iter().enumerate() {
            for (j, v) in self.eval(x0).into_iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        m
    }
}

/// Build an `ns` basis on data and return (basis, design matrix on `x`).
pub fn build_ns<R: Real>(x: &[R], df: usize) -> Result<(NsBasis<R>, Array2<R>), SplineError> {
    let basis = NsBasis::from_data(x, df)?;
    let design = basis.design(x);
    Ok((basis, design))
}

/// `[(u - a)_+^3 - (u - last)_+^3] / (last - a)`, or its derivative.
#[inline]
fn dfun<R: Real>(a: R, last: R, u: R, order: u8) -> R {
    let num = match order {
        0 => pos3(u - a) - pos3(u - last),
        1 => real::<R>(3.0) * (pos2(u - a) - pos2(u - last)),
        2 => real::<R>(6.0) * (pos1(u - a) - pos1(u - last)),
        _ => unreachable!(),
    };
    num / (last - a)
}

#[inline]
fn pos1<R: Real>(t: R) -> R {
    if t > R::zero() {
        t
    } else {
        R::zero()
    }
}

#[inline]
fn pos2<R: Real>(t: R) -> R {
    let p = pos1(t);
    p * p
}

#[inline]
fn pos3<R: Real>(t: R) -> R {
    let p = pos1(t);
    p * p * p
}
