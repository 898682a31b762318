//! Model assembly and cumulative relative-risk estimation.
//!
//! For each (definition, stratum, variant) the design matrix holds, in fixed
//! order: intercept, crossbasis block, ns(RH), ns(PM10), ns(time), ns(Dos),
//! day-of-week dummies (Monday reference), the holiday dummy, and - for the
//! added-effect variant - ns(T) on daily mean temperature. Days without a
//! complete lag window are dropped from the fit.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossbasis::{
    build_crossbasis, CrossBasis, CrossBasisMeta, CrossbasisError, LagKnots, LagSpec,
};
use crate::data::{calendar_features, Cause, DailySeries, IngestError, Sex, StratumKey};
use crate::ete::{detect, DetectError, EteDefinition, EteIndicator, EteKind, PercentileScope};
use crate::glm::{self, DesignMatrix, FitResult, GlmError};
use crate::spline::{NsBasis, SplineError};

/// 97.5% normal quantile used for every confidence interval.
pub const Z_CRITICAL: f64 = 1.959964;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectsError {
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Crossbasis(#[from] CrossbasisError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("fit did not converge")]
    NonConvergedFit,
    #[error("drop prefix {drop} is shorter than the lag window {max_lag}")]
    BadWindow { drop: usize, max_lag: usize },
    #[error("crossbasis block mismatch: fit has {fit_cols} cb columns, basis has {basis_cols}")]
    BlockMismatch { fit_cols: usize, basis_cols: usize },
}

/// Overall effect (no temperature adjustment) or added effect (temperature
/// spline included, isolating the event effect beyond the day's mean level).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Overall,
    Added,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Overall => "overall",
            Variant::Added => "added",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overall" => Ok(Variant::Overall),
            "added" => Ok(Variant::Added),
            other => Err(format!(
                "unknown variant '{other}' (expected overall|added)"
            )),
        }
    }
}

/// Full specification of one model fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub definition: EteDefinition,
    pub stratum: StratumKey,
    pub variant: Variant,
    pub lag_spec: LagSpec,
    pub df_rh: usize,
    pub df_pm10: usize,
    pub df_time_per_year: usize,
    pub df_dos: usize,
    /// Only used by the added variant.
    pub df_temp: usize,
    #[serde(default)]
    pub lag_knots: LagKnots,
    #[serde(default)]
    pub percentile_scope: PercentileScope,
}

impl ModelConfig {
    /// Reference configuration: 2 df for RH, PM10, Dos and the temperature
    /// spline, 2 df per year for the long-term trend, and the kind-specific
    /// lag window (10 days / 4 df for heat, 27 days / 3 df for cold).
    pub fn new(definition: EteDefinition, stratum: StratumKey, variant: Variant) -> Self {
        let lag_spec = match definition.kind {
            EteKind::HeatWave => LagSpec::heat_default(),
            EteKind::ColdSpell => LagSpec::cold_default(),
        };
        Self {
            definition,
            stratum,
            variant,
            lag_spec,
            df_rh: 2,
            df_pm10: 2,
            df_time_per_year: 2,
            df_dos: 2,
            df_temp: 2,
            lag_knots: LagKnots::default(),
            percentile_scope: PercentileScope::default(),
        }
    }

    /// Trend spline df: `df_time_per_year` per 365.25-day year, rounded to
    /// the nearest integer and at least 1.
    pub fn time_df(&self, series: &DailySeries) -> usize {
        ((self.df_time_per_year as f64 * series.span_years()).round() as usize).max(1)
    }
}

/// Optional overrides applied on top of [`ModelConfig::new`] defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigOverrides {
    pub max_lag_heat: Option<usize>,
    pub lag_df_heat: Option<usize>,
    pub max_lag_cold: Option<usize>,
    pub lag_df_cold: Option<usize>,
    pub df_rh: Option<usize>,
    pub df_pm10: Option<usize>,
    pub df_time_per_year: Option<usize>,
    pub df_dos: Option<usize>,
    pub df_temp: Option<usize>,
    pub lag_knots: Option<LagKnots>,
    pub percentile_scope: Option<PercentileScope>,
}

impl ConfigOverrides {
    pub fn apply(&self, config: &mut ModelConfig) {
        match config.definition.kind {
            EteKind::HeatWave => {
                if let Some(m) = self.max_lag_heat {
                    config.lag_spec.max_lag = m;
                }
                if let Some(d) = self.lag_df_heat {
                    config.lag_spec.lag_df = d;
                }
            }
            EteKind::ColdSpell => {
                if let Some(m) = self.max_lag_cold {
                    config.lag_spec.max_lag = m;
                }
                if let Some(d) = self.lag_df_cold {
                    config.lag_spec.lag_df = d;
                }
            }
        }
        if let Some(v) = self.df_rh {
            config.df_rh = v;
        }
        if let Some(v) = self.df_pm10 {
            config.df_pm10 = v;
        }
        if let Some(v) = self.df_time_per_year {
            config.df_time_per_year = v;
        }
        if let Some(v) = self.df_dos {
            config.df_dos = v;
        }
        if let Some(v) = self.df_temp {
            config.df_temp = v;
        }
        if let Some(v) = self.lag_knots {
            config.lag_knots = v;
        }
        if let Some(v) = self.percentile_scope {
            config.percentile_scope = v;
        }
    }
}

/// Design matrix plus the pieces needed to interpret the fit.
#[derive(Debug, Clone)]
pub struct AssembledModel {
    pub design: DesignMatrix<f64>,
    pub crossbasis: CrossBasis<f64>,
    pub indicator: EteIndicator,
    pub drop_prefix: usize,
    pub time_df: usize,
}

/// Assemble the design for a config, dropping the first `max_lag` days.
pub fn assemble_design(
    series: &DailySeries,
    config: &ModelConfig,
) -> Result<AssembledModel, EffectsError> {
    assemble_design_windowed(series, config, None)
}

/// Assemble with an explicit dropped prefix (>= the lag window); the
/// sensitivity grid uses this to fit different lag windows on identical rows.
pub fn assemble_design_windowed(
    series: &DailySeries,
    config: &ModelConfig,
    drop_override: Option<usize>,
) -> Result<AssembledModel, EffectsError> {
    let indicator = detect(series, &config.definition, config.percentile_scope)?;
    let crossbasis = build_crossbasis::<f64>(&indicator.flags, config.lag_spec, config.lag_knots)?;
    let max_lag = config.lag_spec.max_lag;
    let drop = drop_override.unwrap_or(max_lag);
    if drop < max_lag {
        return Err(EffectsError::BadWindow { drop, max_lag });
    }
    let n = series.len();
    if drop >= n {
        return Err(CrossbasisError::SeriesTooShort {
            max_lag: drop,
            got: n,
        }
        .into());
    }
    let n_eff = n - drop;

    let cb_block = crossbasis
        .design_block
        .slice(ndarray::s![drop - max_lag.., ..]);
    if cb_block.iter().all(|v| *v == 0.0) {
        return Err(GlmError::AllZeroExposure.into());
    }

    let features = calendar_features(series);
    let retained = &series.records()[drop..];
    let rh: Vec<f64> = retained.iter().map(|r| r.rh).collect();
    let pm10: Vec<f64> = retained.iter().map(|r| r.pm10).collect();
    let temp: Vec<f64> = retained.iter().map(|r| r.temp_mean).collect();
    let time: Vec<f64> = features[drop..]
        .iter()
        .map(|f| f.time_index as f64)
        .collect();
    let dos: Vec<f64> = features[drop..].iter().map(|f| f.dos as f64).collect();
    let time_df = config.time_df(series);

    let mut blocks: Vec<(String, Array2<f64>)> = vec![
        ("cb".into(), cb_block.to_owned()),
        ("rh".into(), ns_block("rh", &rh, config.df_rh)?),
        ("pm10".into(), ns_block("pm10", &pm10, config.df_pm10)?),
        ("time".into(), ns_block("time", &time, time_df)?),
        ("dos".into(), ns_block("dos", &dos, config.df_dos)?),
    ];

    let mut dow = Array2::zeros((n_eff, 6));
    for (i, f) in features[drop..].iter().enumerate() {
        if f.dow >= 1 {
            dow[[i, (f.dow - 1) as usize]] = 1.0;
        }
    }
    blocks.push(("dow".into(), dow));
    let mut holiday = Array2::zeros((n_eff, 1));
    for (i, f) in features[drop..].iter().enumerate() {
        if f.holiday {
            holiday[[i, 0]] = 1.0;
        }
    }
    blocks.push(("holiday".into(), holiday));
    if config.variant == Variant::Added {
        blocks.push(("temp".into(), ns_block("temp", &temp, config.df_temp)?));
    }

    let p = 1 + blocks.iter().map(|(_, b)| b.ncols()).sum::<usize>();
    let mut x = Array2::zeros((n_eff, p));
    let mut col_names = Vec::with_capacity(p);
    col_names.push("intercept".to_string());
    for i in 0..n_eff {
        x[[i, 0]] = 1.0;
    }
    let mut col = 1;
    const DOW_NAMES: [&str; 6] = ["tue", "wed", "thu", "fri", "sat", "sun"];
    for (name, block) in &blocks {
        for j in 0..block.ncols() {
            let col_name = match name.as_str() {
                "dow" => format!("dow_{}", DOW_NAMES[j]),
                "holiday" => "holiday".to_string(),
                _ => format!("{name}_{}", j + 1),
            };
            col_names.push(col_name);
            for i in 0..n_eff {
                x[[i, col]] = block[[i, j]];
            }
            col += 1;
        }
    }

    let counts = series.counts(&config.stratum)?;
    let y = Array1::from_vec(counts[drop..].to_vec());
    let design = DesignMatrix::new(x, y, col_names)?;
    Ok(AssembledModel {
        design,
        crossbasis,
        indicator,
        drop_prefix: drop,
        time_df,
    })
}

/// Natural spline design block; a covariate too degenerate to support its
/// spline (for instance constant temperature under the added variant) is
/// reported as a singular design.
fn ns_block(name: &str, values: &[f64], df: usize) -> Result<Array2<f64>, EffectsError> {
    match NsBasis::from_data(values, df) {
        Ok(basis) => Ok(basis.design(values)),
        Err(SplineError::DegenerateInput { .. }) | Err(SplineError::DegenerateKnots) => {
            Err(GlmError::SingularDesign {
                column: name.to_string(),
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Cumulative RR of a sustained exposure with its Wald 95% CI.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RrInterval {
    pub rr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub log_rr: f64,
    pub se_log_rr: f64,
    pub significant: bool,
}

/// Delta-method cumulative RR: `log RR = c . theta`,
/// `var = c' Sigma_theta c`, interval `exp(log RR +- 1.959964 se)`.
pub fn cumulative_rr(
    fit: &FitResult<f64>,
    cb: &CrossBasis<f64>,
) -> Result<RrInterval, EffectsError> {
    if !fit.converged {
        return Err(EffectsError::NonConvergedFit);
    }
    let idx: Vec<usize> = fit
        .col_names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with("cb_"))
        .map(|(i, _)| i)
        .collect();
    let c = &cb.cumulative_contrast;
    if idx.len() != c.len() {
        return Err(EffectsError::BlockMismatch {
            fit_cols: idx.len(),
            basis_cols: c.len(),
        });
    }
    let mut log_rr = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        log_rr += c[k] * fit.beta[i];
    }
    let mut var = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            var += c[a] * c[b] * fit.vcov_at(i, j);
        }
    }
    let se = var.max(0.0).sqrt();
    let (ci_low, ci_high) = (
        (log_rr - Z_CRITICAL * se).exp(),
        (log_rr + Z_CRITICAL * se).exp(),
    );
    Ok(RrInterval {
        rr: log_rr.exp(),
        ci_low,
        ci_high,
        log_rr,
        se_log_rr: se,
        significant: ci_low > 1.0 || ci_high < 1.0,
    })
}

/// One fitted cell: configuration, estimate, and fit diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RrEstimate {
    pub config: ModelConfig,
    #[serde(flatten)]
    pub interval: RrInterval,
    pub crossbasis: CrossBasisMeta,
    pub fit: FitResult<f64>,
}

/// Fit one configuration end to end.
pub fn fit_config(
    series: &DailySeries,
    config: &ModelConfig,
    drop_override: Option<usize>,
) -> Result<RrEstimate, EffectsError> {
    let assembled = assemble_design_windowed(series, config, drop_override)?;
    let fit = glm::fit(&assembled.design)?;
    let interval = cumulative_rr(&fit, &assembled.crossbasis)?;
    Ok(RrEstimate {
        config: config.clone(),
        interval,
        crossbasis: assembled.crossbasis.meta(),
        fit,
    })
}

/// One panel cell; failures are recorded without aborting the panel.
#[derive(Debug, Clone, Serialize)]
pub struct PanelCell {
    pub definition: EteDefinition,
    pub cause: Cause,
    pub sex: Sex,
    pub variant: Variant,
    /// Resolved configuration the cell was (or would have been) fitted with.
    pub config: ModelConfig,
    pub outcome: Result<RrEstimate, String>,
}

/// Fit the Cartesian product of definitions, strata, and variants.
///
/// Cells are fitted in parallel; output order is (variant, definition-list
/// order, stratum) independent of scheduling, so repeated runs are
/// byte-identical regardless of thread count.
pub fn run_panel(
    series: &DailySeries,
    definitions: &[EteDefinition],
    strata: &[StratumKey],
    variants: &[Variant],
    overrides: &ConfigOverrides,
) -> Vec<PanelCell> {
    let mut variants: Vec<Variant> = variants.to_vec();
    variants.sort();
    variants.dedup();
    let mut strata: Vec<StratumKey> = strata.to_vec();
    strata.sort();
    strata.dedup();

    let mut configs = Vec::new();
    for variant in &variants {
        for definition in definitions {
            for stratum in &strata {
                let mut config = ModelConfig::new(*definition, stratum.clone(), *variant);
                overrides.apply(&mut config);
                configs.push(config);
            }
        }
    }

    configs
        .into_par_iter()
        .map(|config| {
            let outcome = fit_config(series, &config, None).map_err(|e| e.to_string());
            PanelCell {
                definition: config.definition,
                cause: config.stratum.cause.clone(),
                sex: config.stratum.sex,
                variant: config.variant,
                config,
                outcome,
            }
        })
        .collect()
}
