//! Quasi-Poisson generalized linear model with log link.
//!
//! Fitting is iteratively reweighted least squares: for the log link the
//! working weights are `mu` and the working response is
//! `log(mu) + (y - mu)/mu`. Iteration stops when the relative deviance
//! change `|dD| / (|D| + 0.1)` falls below 1e-8, capped at 100 iterations.
//! The dispersion is the Pearson statistic over `n - p`; the coefficient
//! covariance is `phi * (X'WX)^-1` from the final solve; QAIC is
//! `-2 l / phi + 2 p` with the full Poisson log-likelihood (log-factorial
//! terms included, so values are comparable across models on fixed data).

use ndarray::{Array1, Array2};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{weighted_least_squares, LinalgError};
use crate::real::{real, real_usize, Real};

const DEVIANCE_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100;
const MU_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GlmError {
    #[error("singular design: column '{column}' is collinear with earlier columns")]
    SingularDesign { column: String },
    #[error("crossbasis block is identically zero: no event days reach the fitting window")]
    AllZeroExposure,
    #[error("response must contain at least one positive count")]
    DegenerateResponse,
    #[error("invalid design matrix: {0}")]
    InvalidDesign(String),
}

/// Validated design matrix with named columns and a count response.
#[derive(Debug, Clone)]
pub struct DesignMatrix<R: Real> {
    x: Array2<R>,
    y: Array1<R>,
    col_names: Vec<String>,
}

impl<R: Real> DesignMatrix<R> {
    pub fn new(x: Array2<R>, y: Array1<R>, col_names: Vec<String>) -> Result<Self, GlmError> {
        let n = x.nrows();
        let p = x.ncols();
        if col_names.len() != p {
            return Err(GlmError::InvalidDesign(format!(
                "{} column names for {p} columns",
                col_names.len()
            )));
        }
        if y.len() != n {
            return Err(GlmError::InvalidDesign(format!(
                "response length {} does not match {n} rows",
                y.len()
            )));
        }
        if p == 0 || p >= n {
            return Err(GlmError::InvalidDesign(format!(
                "need 1 <= p < n, got p = {p}, n = {n}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::InvalidDesign("non-finite design entry".into()));
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() || *v < R::zero() || v.fract() != R::zero() {
                return Err(GlmError::InvalidDesign(format!(
                    "response[{i}] must be a non-negative integer count"
                )));
            }
        }
        Ok(Self { x, y, col_names })
    }

    pub fn x(&self) -> &Array2<R> {
        &self.x
    }

    pub fn response(&self) -> &Array1<R> {
        &self.y
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    /// Indices of the columns whose name starts with `prefix`.
    pub fn block(&self, prefix: &str) -> Vec<usize> {
        self.col_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Converged (or last-iterate) quasi-Poisson fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult<R: Real> {
    pub beta: Vec<R>,
    /// Row-major p x p covariance of beta: `phi * (X'WX)^-1`.
    pub vcov: Vec<Vec<R>>,
    pub dispersion: R,
    pub deviance: R,
    pub pearson_x2: R,
    pub log_likelihood: R,
    pub qaic: R,
    pub iterations: usize,
    pub converged: bool,
    pub col_names: Vec<String>,
    pub n_obs: usize,
}

impl<R: Real> FitResult<R> {
    pub fn n_params(&self) -> usize {
        self.beta.len()
    }

    pub fn vcov_at(&self, i: usize, j: usize) -> R {
        self.vcov[i][j]
    }
}

/// Fit the quasi-Poisson GLM by IRLS, starting from `mu = y + 0.5`.
///
/// Never iterates past 100 steps; a fit that fails to reach the deviance
/// tolerance is returned with `converged = false` rather than as an error.
pub fn fit<R: Real>(design: &DesignMatrix<R>) -> Result<FitResult<R>, GlmError> {
    let x = &design.x;
    let y = &design.y;
    let n = design.n_rows();
    let p = design.n_cols();
    if y.iter().copied().sum::<R>() <= R::zero() {
        return Err(GlmError::DegenerateResponse);
    }

    let floor = real::<R>(MU_FLOOR);
    // 1e-8 sits below f32 resolution; floor the tolerance at 100 epsilon of
    // the working scalar (a no-op for f64)
    let tol = real::<R>(DEVIANCE_TOL).max(R::epsilon() * real::<R>(100.0));
    let tenth = real::<R>(0.1);

    let mut mu: Array1<R> = y.mapv(|v| v + real::<R>(0.5));
    let mut deviance = poisson_deviance(y, &mu);
    let mut beta: Array1<R> = Array1::zeros(p);
    let mut xtx_inv: Array2<R> = Array2::zeros((p, p));
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let w = mu.clone();
        let z = Array1::from_shape_fn(n, |i| mu[i].ln() + (y[i] - mu[i]) / mu[i]);
        let sol = weighted_least_squares(x, &w, &z).map_err(|e| match e {
            LinalgError::SingularDesign { column } => GlmError::SingularDesign {
                column: design.col_names[column].clone(),
            },
            LinalgError::DimensionMismatch(msg) => GlmError::InvalidDesign(msg),
        })?;
        let eta = x.dot(&sol.beta);
        let new_mu = eta.mapv(|e| e.exp().max(floor));
        if new_mu.iter().any(|m| !m.is_finite()) {
            break; // diverged; report the last finite iterate unconverged
        }
        let new_dev = poisson_deviance(y, &new_mu);
        beta = sol.beta;
        xtx_inv = sol.xtx_inv;
        mu = new_mu;
        if !new_dev.is_finite() {
            deviance = new_dev;
            break;
        }
        let rel = (new_dev - deviance).abs() / (new_dev.abs() + tenth);
        deviance = new_dev;
        if rel < tol {
            converged = true;
            break;
        }
    }

    let pearson = pearson_x2(y, &mu);
    let dispersion = pearson / real_usize::<R>(n - p);
    let log_likelihood = poisson_log_likelihood(y, &mu);
    let two = real::<R>(2.0);
    let qaic = -two * log_likelihood / dispersion + two * real_usize::<R>(p);

    let vcov: Vec<Vec<R>> = (0..p)
        .map(|i| (0..p).map(|j| dispersion * xtx_inv[[i, j]]).collect())
        .collect();

    Ok(FitResult {
        beta: beta.to_vec(),
        vcov,
        dispersion,
        deviance,
        pearson_x2: pearson,
        log_likelihood,
        qaic,
        iterations,
        converged,
        col_names: design.col_names.clone(),
        n_obs: n,
    })
}

/// QAIC with an optional dispersion override (used by the sensitivity grid,
/// where one reference dispersion puts every candidate on a common scale).
pub fn qaic<R: Real>(fit: &FitResult<R>, phi_override: Option<R>) -> R {
    let phi = phi_override.unwrap_or(fit.dispersion);
    let two = real::<R>(2.0);
    -two * fit.log_likelihood / phi + two * real_usize::<R>(fit.n_params())
}

/// Poisson deviance `2 sum[y log(y/mu) - (y - mu)]` with the y = 0 limit.
pub fn poisson_deviance<R: Real>(y: &Array1<R>, mu: &Array1<R>) -> R {
    let two = real::<R>(2.0);
    let mut dev = R::zero();
    for i in 0..y.len() {
        let term = if y[i] > R::zero() {
            y[i] * (y[i] / mu[i]).ln() - (y[i] - mu[i])
        } else {
            mu[i]
        };
        dev += term;
    }
    two * dev
}

fn pearson_x2<R: Real>(y: &Array1<R>, mu: &Array1<R>) -> R {
    let mut x2 = R::zero();
    for i in 0..y.len() {
        let r = y[i] - mu[i];
        x2 += r * r / mu[i];
    }
    x2
}

/// Full Poisson log-likelihood `sum[y log mu - mu - log(y!)]`.
pub fn poisson_log_likelihood<R: Real>(y: &Array1<R>, mu: &Array1<R>) -> R {
    let max_y = y
        .iter()
        .fold(0usize, |m, v| m.max(v.to_usize().unwrap_or(0)));
    let log_factorial = log_factorial_table::<R>(max_y);
    let mut ll = R::zero();
    for i in 0..y.len() {
        let yi = y[i].to_usize().expect("validated integral count");
        let ylogmu = if y[i] > R::zero() {
            y[i] * mu[i].ln()
        } else {
            R::zero()
        };
        ll += ylogmu - mu[i] - log_factorial[yi];
    }
    ll
}

fn log_factorial_table<R: Real>(max: usize) -> Vec<R> {
    let mut table = Vec::with_capacity(max + 1);
    table.push(R::zero());
    for k in 1..=max {
        let prev = table[k - 1];
        table.push(prev + real_usize::<R>(k).ln());
    }
    table
}
