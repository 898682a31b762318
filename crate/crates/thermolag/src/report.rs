//! Result serialization and plot-ready figure bundles.
//!
//! `PanelResults` is the JSON contract produced by the fit subcommand and
//! consumed by the report subcommand. The figure bundles are long-format
//! CSVs, one per figure analogue: heat-wave panels (overall and added
//! variants), cold-spell panels, and the sex-stratified CVD/RESP panel.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossbasis::CrossBasisMeta;
use crate::data::{Cause, Sex, StratumKey};
use crate::effects::{PanelCell, RrInterval, Variant};
use crate::ete::EteKind;
use crate::glm::FitResult;
use crate::manifest::EmbeddedManifest;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed results: {0}")]
    MalformedResults(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fit diagnostics retained in the results JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDump {
    pub col_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Row-major coefficient covariance.
    pub vcov: Vec<Vec<f64>>,
    pub dispersion: f64,
    pub deviance: f64,
    pub log_likelihood: f64,
    pub qaic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_obs: usize,
}

impl From<&FitResult<f64>> for FitDump {
    fn from(fit: &FitResult<f64>) -> Self {
        Self {
            col_names: fit.col_names.clone(),
            beta: fit.beta.clone(),
            vcov: fit.vcov.clone(),
            dispersion: fit.dispersion,
            deviance: fit.deviance,
            log_likelihood: fit.log_likelihood,
            qaic: fit.qaic,
            iterations: fit.iterations,
            converged: fit.converged,
            n_obs: fit.n_obs,
        }
    }
}

/// One panel cell in the results JSON; failed cells carry `error` and no
/// estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelCellJson {
    pub definition: crate::ete::EteDefinition,
    pub cause: Cause,
    pub sex: Sex,
    pub variant: Variant,
    /// Resolved model configuration for the cell.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<crate::effects::ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<RrInterval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dispersion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qaic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crossbasis: Option<CrossBasisMeta>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<FitDump>,
}

impl From<&PanelCell> for PanelCellJson {
    fn from(cell: &PanelCell) -> Self {
        match &cell.outcome {
            Ok(est) => Self {
                definition: cell.definition,
                cause: cell.cause.clone(),
                sex: cell.sex,
                variant: cell.variant,
                config: Some(cell.config.clone()),
                error: None,
                estimate: Some(est.interval),
                dispersion: Some(est.fit.dispersion),
                qaic: Some(est.fit.qaic),
                converged: Some(est.fit.converged),
                crossbasis: Some(est.crossbasis.clone()),
                fit: Some(FitDump::from(&est.fit)),
            },
            Err(message) => Self {
                definition: cell.definition,
                cause: cell.cause.clone(),
                sex: cell.sex,
                variant: cell.variant,
                config: Some(cell.config.clone()),
                error: Some(message.clone()),
                estimate: None,
                dispersion: None,
                qaic: None,
                converged: None,
                crossbasis: None,
                fit: None,
            },
        }
    }
}

/// Fixed fitter conventions recorded with every panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmSettings {
    pub convergence_tolerance: f64,
    pub max_iterations: usize,
    pub initialization: String,
    pub dispersion_estimator: String,
    pub ci_z: f64,
}

impl Default for GlmSettings {
    fn default() -> Self {
        Self {
            convergence_tolerance: 1e-8,
            max_iterations: 100,
            initialization: "mu = y + 0.5".into(),
            dispersion_estimator: "pearson".into(),
            ci_z: crate::effects::Z_CRITICAL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelMetadata {
    pub panel: String,
    pub variants: Vec<Variant>,
    pub strata: Vec<StratumKey>,
    pub definitions: Vec<String>,
    pub overrides: crate::effects::ConfigOverrides,
    pub series_start: NaiveDate,
    pub series_end: NaiveDate,
    pub series_days: usize,
    pub glm: GlmSettings,
    pub notes: Vec<String>,
}

/// The results JSON written by the fit subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelResults {
    pub manifest: EmbeddedManifest,
    pub metadata: PanelMetadata,
    pub cells: Vec<PanelCellJson>,
}

impl PanelResults {
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::MalformedResults(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable results")
    }
}

const FLAT_HEADER: &str =
    "definition,cause,sex,variant,rr,ci_low,ci_high,significant,phi,qaic,converged,error";

/// One row per cell, estimates left empty for failed cells.
pub fn write_flat_csv<W: Write>(results: &PanelResults, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{FLAT_HEADER}")?;
    for cell in &results.cells {
        let row = match (&cell.estimate, &cell.error) {
            (Some(e), _) => format!(
                "{},{},{},{},{},{},{},{},{},{},{},",
                cell.definition.name(),
                cell.cause,
                cell.sex,
                cell.variant,
                e.rr,
                e.ci_low,
                e.ci_high,
                e.significant,
                cell.dispersion.unwrap_or(f64::NAN),
                cell.qaic.unwrap_or(f64::NAN),
                cell.converged.unwrap_or(false),
            ),
            (None, err) => format!(
                "{},{},{},{},,,,,,,,{}",
                cell.definition.name(),
                cell.cause,
                cell.sex,
                cell.variant,
                err.as_deref().unwrap_or("unknown error").replace(',', ";"),
            ),
        };
        writeln!(out, "{row}")?;
    }
    Ok(())
}

const FIGURE_HEADER: &str = "definition,cause,sex,variant,rr,ci_low,ci_high";

fn figure_rows<'a>(
    results: &'a PanelResults,
    keep: impl Fn(&PanelCellJson) -> bool + 'a,
) -> impl Iterator<Item = String> + 'a {
    results.cells.iter().filter_map(move |cell| {
        let e = cell.estimate.as_ref()?;
        if !keep(cell) {
            return None;
        }
        Some(format!(
            "{},{},{},{},{},{},{}",
            cell.definition.name(),
            cell.cause,
            cell.sex,
            cell.variant,
            e.rr,
            e.ci_low,
            e.ci_high
        ))
    })
}

fn write_figure<W: Write>(
    mut out: W,
    results: &PanelResults,
    keep: impl Fn(&PanelCellJson) -> bool,
) -> std::io::Result<()> {
    writeln!(out, "{FIGURE_HEADER}")?;
    for row in figure_rows(results, keep) {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Files produced by [`write_report_bundle`], in write order.
pub const REPORT_FILES: [&str; 5] = [
    "fig2_overall.csv",
    "fig2_added.csv",
    "fig3_overall.csv",
    "fig3_added.csv",
    "fig4.csv",
];

/// Figure bundle:
/// * fig2_overall/added: heat waves, all-sex strata, every cause;
/// * fig3_overall/added: cold spells, all-sex strata, every cause;
/// * fig4: CVD and RESP only, female/male strata, both kinds and variants.
pub fn write_report_bundle(results: &PanelResults, out_dir: &Path) -> Result<(), ReportError> {
    std::fs::create_dir_all(out_dir)?;
    let file = |name: &str| std::fs::File::create(out_dir.join(name));

    write_figure(file(REPORT_FILES[0])?, results, |c| {
        c.definition.kind == EteKind::HeatWave && c.sex == Sex::All && c.variant == Variant::Overall
    })?;
    write_figure(file(REPORT_FILES[1])?, results, |c| {
        c.definition.kind == EteKind::HeatWave && c.sex == Sex::All && c.variant == Variant::Added
    })?;
    write_figure(file(REPORT_FILES[2])?, results, |c| {
        c.definition.kind == EteKind::ColdSpell
            && c.sex == Sex::All
            && c.variant == Variant::Overall
    })?;
    write_figure(file(REPORT_FILES[3])?, results, |c| {
        c.definition.kind == EteKind::ColdSpell && c.sex == Sex::All && c.variant == Variant::Added
    })?;
    write_figure(file(REPORT_FILES[4])?, results, |c| {
        matches!(c.cause, Cause::Cvd | Cause::Resp) && matches!(c.sex, Sex::Female | Sex::Male)
    })?;
    Ok(())
}
