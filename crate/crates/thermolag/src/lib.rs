//! Extreme-temperature-event mortality analysis pipeline.
//!
//! The library implements the full chain: daily-series ingestion, heat-wave /
//! cold-spell detection under percentile-by-duration definitions, natural
//! cubic spline confounder bases, the distributed-lag crossbasis,
//! quasi-Poisson regression, cumulative relative-risk estimation, the QAIC
//! sensitivity grid, and a seeded synthetic-data generator used to verify
//! every estimate against known ground truth.
//!
//! The numeric core (splines, crossbasis, least squares, GLM) is generic
//! over the scalar type through [`real::Real`]; the pipeline and CLI run on
//! `f64` via the aliases below.

pub mod crossbasis;
pub mod data;
pub mod effects;
pub mod ete;
pub mod glm;
pub mod linalg;
pub mod manifest;
pub mod quantile;
pub mod real;
pub mod report;
pub mod sensitivity;
pub mod simulate;
pub mod spline;
pub mod stats;

pub use real::Real;

/// `f64` natural cubic spline basis.
pub type NsBasis64 = spline::NsBasis<f64>;
/// `f64` lag basis.
pub type LagBasis64 = crossbasis::LagBasis<f64>;
/// `f64` crossbasis.
pub type CrossBasis64 = crossbasis::CrossBasis<f64>;
/// `f64` design matrix.
pub type DesignMatrix64 = glm::DesignMatrix<f64>;
/// `f64` quasi-Poisson fit result.
pub type FitResult64 = glm::FitResult<f64>;
