//! QAIC calibration grid.
//!
//! Varies the confounder degrees of freedom and the lag window around a base
//! configuration and ranks every candidate by QAIC. Two conventions keep the
//! comparison coherent:
//!
//! * all candidates are fitted on the intersection window (rows after the
//!   largest `max_lag` in the grid are dropped for everyone), so likelihoods
//!   refer to identical data;
//! * QAIC uses one reference dispersion, taken from the most complex model
//!   in the grid, rather than each candidate's own.

use serde::{Deserialize, Serialize};

use crate::data::DailySeries;
use crate::effects::{
    assemble_design_windowed, cumulative_rr, EffectsError, ModelConfig, RrInterval,
};
use crate::ete::EteKind;
use crate::glm;

/// Candidate values for each tunable dimension. The default mirrors the
/// published calibration: df 2-4 for RH and PM10, lag spline df 2-4, lag
/// windows {0-7, 0-10} days for heat and {0-21, 0-27} for cold, and df 1-4
/// for both the long-term trend (per year) and day-of-season terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityGrid {
    pub df_rh: Vec<usize>,
    pub df_pm10: Vec<usize>,
    pub lag_df: Vec<usize>,
    pub max_lag: Vec<usize>,
    pub df_time_per_year: Vec<usize>,
    pub df_dos: Vec<usize>,
}

impl Default for SensitivityGrid {
    fn default() -> Self {
        Self::paper_default(EteKind::HeatWave)
    }
}

impl SensitivityGrid {
    pub fn paper_default(kind: EteKind) -> Self {
        Self {
            df_rh: vec![2, 3, 4],
            df_pm10: vec![2, 3, 4],
            lag_df: vec![2, 3, 4],
            max_lag: match kind {
                EteKind::HeatWave => vec![7, 10],
                EteKind::ColdSpell => vec![21, 27],
            },
            df_time_per_year: vec![1, 2, 3, 4],
            df_dos: vec![1, 2, 3, 4],
        }
    }

    pub fn len(&self) -> usize {
        self.df_rh.len()
            * self.df_pm10.len()
            * self.lag_df.len()
            * self.max_lag.len()
            * self.df_time_per_year.len()
            * self.df_dos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Enumerate candidate configs in canonical order: max_lag, lag_df,
    /// df_rh, df_pm10, df_time_per_year, df_dos (outermost first). This
    /// order is the final ranking tiebreaker.
    pub fn configs(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &max_lag in &self.max_lag {
            for &lag_df in &self.lag_df {
                for &df_rh in &self.df_rh {
                    for &df_pm10 in &self.df_pm10 {
                        for &df_time in &self.df_time_per_year {
                            for &df_dos in &self.df_dos {
                                let mut config = base.clone();
                                config.lag_spec.max_lag = max_lag;
                                config.lag_spec.lag_df = lag_df;
                                config.df_rh = df_rh;
                                config.df_pm10 = df_pm10;
                                config.df_time_per_year = df_time;
                                config.df_dos = df_dos;
                                out.push(config);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// The most complex candidate: every dimension at its maximum. Its fit
    /// supplies the shared QAIC dispersion.
    fn reference_config(&self, base: &ModelConfig) -> ModelConfig {
        let mut config = base.clone();
        config.lag_spec.max_lag = *self.max_lag.iter().max().expect("non-empty");
        config.lag_spec.lag_df = *self.lag_df.iter().max().expect("non-empty");
        config.df_rh = *self.df_rh.iter().max().expect("non-empty");
        config.df_pm10 = *self.df_pm10.iter().max().expect("non-empty");
        config.df_time_per_year = *self.df_time_per_year.iter().max().expect("non-empty");
        config.df_dos = *self.df_dos.iter().max().expect("non-empty");
        config
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub config: ModelConfig,
    pub n_params: Option<usize>,
    pub qaic: Option<f64>,
    pub estimate: Option<RrInterval>,
    pub dispersion: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
    pub is_base: bool,
}

/// Ranked grid plus the base-config fit on the same window; the base result
/// is always reported next to the winner, never silently replaced by it.
#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    /// Ascending by QAIC; ties break on fewer parameters, then enumeration
    /// order. Failed points sort after all successful ones.
    pub points: Vec<GridPoint>,
    pub base: GridPoint,
    /// Dispersion shared by every QAIC value.
    pub reference_dispersion: f64,
    pub reference_config: ModelConfig,
    /// Rows dropped from the start of the series for every candidate.
    pub drop_prefix: usize,
}

impl GridResult {
    pub fn best(&self) -> Option<&GridPoint> {
        self.points.iter().find(|p| p.qaic.is_some())
    }
}

fn evaluate_point(
    series: &DailySeries,
    config: &ModelConfig,
    drop: usize,
    phi: f64,
    is_base: bool,
) -> GridPoint {
    let result = assemble_design_windowed(series, config, Some(drop)).and_then(|assembled| {
        let fit = glm::fit(&assembled.design)?;
        let estimate = cumulative_rr(&fit, &assembled.crossbasis)?;
        Ok((fit, estimate))
    });
    match result {
        Ok((fit, estimate)) => GridPoint {
            config: config.clone(),
            n_params: Some(fit.n_params()),
            qaic: Some(glm::qaic(&fit, Some(phi))),
            estimate: Some(estimate),
            dispersion: Some(fit.dispersion),
            converged: Some(fit.converged),
            error: None,
            is_base,
        },
        Err(e) => GridPoint {
            config: config.clone(),
            n_params: None,
            qaic: None,
            estimate: None,
            dispersion: None,
            converged: None,
            error: Some(e.to_string()),
            is_base,
        },
    }
}

/// Fit every grid point around `base` and rank by QAIC.
///
/// Individual candidates may fail (for example a definition with no event
/// days); their errors are recorded and the grid completes.
pub fn run_grid(
    series: &DailySeries,
    base: &ModelConfig,
    grid: &SensitivityGrid,
) -> Result<GridResult, EffectsError> {
    if grid.is_empty() {
        return Err(EffectsError::BadWindow {
            drop: 0,
            max_lag: 0,
        });
    }
    let drop = grid
        .max_lag
        .iter()
        .copied()
        .chain(std::iter::once(base.lag_spec.max_lag))
        .max()
        .expect("non-empty");

    // shared dispersion from the most complex candidate; if it cannot be
    // fitted, fall back to the largest remaining candidate that can
    let reference_config = grid.reference_config(base);
    let mut candidates = grid.configs(base);
    candidates.sort_by_key(|c| {
        std::cmp::Reverse(c.lag_spec.lag_df + c.df_rh + c.df_pm10 + c.df_time_per_year + c.df_dos)
    });
    let mut reference_dispersion = None;
    for candidate in std::iter::once(&reference_config).chain(candidates.iter()) {
        let fitted = assemble_design_windowed(series, candidate, Some(drop))
            .and_then(|a| Ok(glm::fit(&a.design)?));
        if let Ok(fit) = fitted {
            reference_dispersion = Some(fit.dispersion);
            break;
        }
    }
    let phi = reference_dispersion.ok_or(EffectsError::NonConvergedFit)?;

    use rayon::prelude::*;
    let configs = grid.configs(base);
    let mut points: Vec<(usize, GridPoint)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, config)| (i, evaluate_point(series, config, drop, phi, config == base)))
        .collect();

    // ascending qaic; ties -> fewer parameters -> enumeration order;
    // failures last in enumeration order
    points.sort_by(|(ia, a), (ib, b)| match (a.qaic, b.qaic) {
        (Some(qa), Some(qb)) => qa
            .partial_cmp(&qb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.n_params.cmp(&b.n_params))
            .then_with(|| ia.cmp(ib)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ia.cmp(ib),
    });

    let base_point = evaluate_point(series, base, drop, phi, true);
    Ok(GridResult {
        points: points.into_iter().map(|(_, p)| p).collect(),
        base: base_point,
        reference_dispersion: phi,
        reference_config,
        drop_prefix: drop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cause, Sex, StratumKey};
    use crate::effects::Variant;
    use crate::ete::EteDefinition;
    use crate::simulate::{generate, SimSpec};

    fn base_config() -> ModelConfig {
        let def: EteDefinition = "HW_90P_2d".parse().unwrap();
        ModelConfig::new(def, StratumKey::new(Cause::Cvd, Sex::All), Variant::Overall)
    }

    #[test]
    fn paper_grid_has_864_points() {
        let grid = SensitivityGrid::paper_default(EteKind::HeatWave);
        assert_eq!(grid.len(), 864);
        assert_eq!(grid.configs(&base_config()).len(), 864);
        let cold = SensitivityGrid::paper_default(EteKind::ColdSpell);
        assert_eq!(cold.max_lag, vec![21, 27]);
        assert_eq!(cold.len(), 864);
    }

    #[test]
    fn singleton_grid_returns_single_ranked_point() {
        let series = generate(&SimSpec {
            years: 2,
            ..SimSpec::default()
        })
        .unwrap();
        let base = base_config();
        let grid = SensitivityGrid {
            df_rh: vec![2],
            df_pm10: vec![2],
            lag_df: vec![4],
            max_lag: vec![10],
            df_time_per_year: vec![2],
            df_dos: vec![2],
        };
        let result = run_grid(&series, &base, &grid).unwrap();
        assert_eq!(result.points.len(), 1);
        assert!(result.points[0].qaic.is_some());
        assert!(result.points[0].is_base, "singleton equals the base config");
        assert!(result.base.qaic.is_some());
        assert_eq!(result.drop_prefix, 10);
    }

    #[test]
    fn ranking_is_deterministic_and_total() {
        let series = generate(&SimSpec {
            years: 2,
            ..SimSpec::default()
        })
        .unwrap();
        let base = base_config();
        let grid = SensitivityGrid {
            df_rh: vec![2, 3],
            df_pm10: vec![2],
            lag_df: vec![2, 3, 4],
            max_lag: vec![7, 10],
            df_time_per_year: vec![2],
            df_dos: vec![1, 2],
        };
        let a = run_grid(&series, &base, &grid).unwrap();
        let b = run_grid(&series, &base, &grid).unwrap();
        assert_eq!(a.points.len(), 24);
        assert_eq!(a.reference_dispersion, b.reference_dispersion);
        let order_a: Vec<String> = a
            .points
            .iter()
            .map(|p| format!("{:?}{:?}", p.config.lag_spec, p.config))
            .collect();
        let order_b: Vec<String> = b
            .points
            .iter()
            .map(|p| format!("{:?}{:?}", p.config.lag_spec, p.config))
            .collect();
        assert_eq!(order_a, order_b);
        // qaic values are non-decreasing over the successful prefix
        let qaics: Vec<f64> = a.points.iter().filter_map(|p| p.qaic).collect();
        assert!(qaics.windows(2).all(|w| w[0] <= w[1]));
        // every point fitted on the same dropped prefix
        assert_eq!(a.drop_prefix, 10);
        // the base estimate is reported alongside the ranked list
        assert!(a.base.is_base && a.base.qaic.is_some());
    }
}
