//! Dense least-squares machinery for the GLM fitter.
//!
//! The weighted-least-squares step is solved through a Householder QR with
//! column pivoting on the weighted design, never through an explicit
//! normal-equations inverse. Rank deficiency is reported as an error instead
//! of silently dropping columns: a dropped crossbasis column would corrupt
//! the cumulative contrast downstream.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::real::{real_usize, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("design matrix is rank deficient at column {column}")]
    SingularDesign { column: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Solution of a (weighted) least-squares problem.
#[derive(Debug, Clone)]
pub struct WlsSolution<R: Real> {
    pub beta: Array1<R>,
    /// `(X'WX)^-1`, the unscaled coefficient covariance.
    pub xtx_inv: Array2<R>,
}

/// Minimize `||A b - y||_2` via pivoted Householder QR.
pub fn least_squares<R: Real>(a: &Array2<R>, y: &Array1<R>) -> Result<WlsSolution<R>, LinalgError> {
    let n = a.nrows();
    let p = a.ncols();
    if y.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix has {n} rows but rhs has {} entries",
            y.len()
        )));
    }
    if p == 0 || n < p {
        return Err(LinalgError::DimensionMismatch(format!(
            "need n >= p >= 1, got n = {n}, p = {p}"
        )));
    }

    let mut qr = a.clone();
    let mut rhs = y.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut rdiag = vec![R::zero(); p];

    for k in 0..p {
        // pivot on the largest remaining column norm
        let mut best = k;
        let mut best_norm = R::zero();
        for j in k..p {
            let mut s = R::zero();
            for i in k..n {
                let v = qr[[i, j]];
                s += v * v;
            }
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        if best != k {
            for i in 0..n {
                qr.swap([i, k], [i, best]);
            }
            perm.swap(k, best);
        }
        let mut norm = best_norm.sqrt();
        if norm == R::zero() {
            return Err(LinalgError::SingularDesign { column: perm[k] });
        }
        // reflector v = x -+ ||x|| e1, sign chosen against cancellation
        let alpha = qr[[k, k]];
        if alpha > R::zero() {
            norm = -norm;
        }
        qr[[k, k]] = alpha - norm;
        let mut vtv = R::zero();
        for i in k..n {
            let v = qr[[i, k]];
            vtv += v * v;
        }
        for j in k + 1..p {
            let mut dot = R::zero();
            for i in k..n {
                dot += qr[[i, k]] * qr[[i, j]];
            }
            let f = (dot + dot) / vtv;
            for i in k..n {
                let vk = qr[[i, k]];
                qr[[i, j]] -= f * vk;
            }
        }
        let mut dot = R::zero();
        for i in k..n {
            dot += qr[[i, k]] * rhs[i];
        }
        let f = (dot + dot) / vtv;
        for i in k..n {
            let vk = qr[[i, k]];
            rhs[i] -= f * vk;
        }
        rdiag[k] = norm;
    }

    // rank check against the leading (largest) diagonal
    let tol = R::epsilon() * real_usize::<R>(n.max(p)) * rdiag[0].abs();
    for k in 0..p {
        if rdiag[k].abs() <= tol {
            return Err(LinalgError::SingularDesign { column: perm[k] });
        }
    }

    // back substitution: R y = Q' rhs (pivoted coordinates)
    let mut sol = vec![R::zero(); p];
    for i in (0..p).rev() {
        let mut s = rhs[i];
        for j in i + 1..p {
            s -= qr[[i, j]] * sol[j];
        }
        sol[i] = s / rdiag[i];
    }
    let mut beta = Array1::zeros(p);
    for i in 0..p {
        beta[perm[i]] = sol[i];
    }

    // (X'X)^-1 = P R^-1 R^-T P'
    let mut rinv = Array2::zeros((p, p));
    for c in 0..p {
        // solve R col = e_c
        for i in (0..=c).rev() {
            let mut s = if i == c { R::one() } else { R::zero() };
            for j in i + 1..=c {
                s -= qr[[i, j]] * rinv[[j, c]];
            }
            rinv[[i, c]] = s / rdiag[i];
        }
    }
    let mut xtx_inv = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            let mut s = R::zero();
            for k in i.max(j)..p {
                s += rinv[[i, k]] * rinv[[j, k]];
            }
            xtx_inv[[perm[i], perm[j]]] = s;
        }
    }

    Ok(WlsSolution { beta, xtx_inv })
}

/// Weighted least squares: minimize `sum_i w_i (z_i - x_i' b)^2`.
///
/// Weights must be non-negative; rows with zero weight drop out of the fit.
pub fn weighted_least_squares<R: Real>(
    x: &Array2<R>,
    w: &Array1<R>,
    z: &Array1<R>,
) -> Result<WlsSolution<R>, LinalgError> {
    let n = x.nrows();
    if w.len() != n || z.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix has {n} rows, weights {} and rhs {}",
            w.len(),
            z.len()
        )));
    }
    if w.iter().any(|wi| *wi < R::zero() || !wi.is_finite()) {
        return Err(LinalgError::DimensionMismatch(
            "weights must be finite and non-negative".into(),
        ));
    }
    let mut xw = x.clone();
    let mut zw = z.clone();
    for i in 0..n {
        let s = w[i].sqrt();
        for j in 0..x.ncols() {
            xw[[i, j]] *= s;
        }
        zw[i] *= s;
    }
    least_squares(&xw, &zw)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower<R: Real>(a: &Array2<R>) -> Option<Array2<R>> {
    let p = a.nrows();
    if a.ncols() != p {
        return None;
    }
    let mut l: Array2<R> = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= R::zero() {
                    return None;
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}
