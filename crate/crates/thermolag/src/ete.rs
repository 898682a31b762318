//! Extreme-temperature-event definitions and detection.
//!
//! A definition is a percentile threshold plus a minimum run duration. Heat
//! waves flag warm-period days strictly above a high percentile of daily
//! mean temperature; cold spells flag cold-period days strictly below a low
//! percentile. A day is an event day when it belongs to an in-season run of
//! consecutive threshold exceedances at least `min_duration` long; runs are
//! truncated at season boundaries before the length test.
//!
//! Percentiles default to the full study-period temperature distribution;
//! `PercentileScope::Season` restricts them to the definition's season.

use std::fmt;
use std::str::FromStr;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{season_of, DailySeries, Season};
use crate::quantile::quantile;
use crate::stats::{summarize_slice, Summary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectError {
    #[error("series is empty")]
    EmptySeries,
    #[error("percentile must lie strictly inside (0, 100), got {0}")]
    BadPercentile(String),
    #[error("minimum duration must be at least 1 day")]
    BadDuration,
    #[error("cannot parse ETE definition '{0}' (expected e.g. HW_92.5P_3d or CS_5P_2d)")]
    BadName(String),
    #[error("indicator must span at least one full calendar year")]
    ShortIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EteKind {
    HeatWave,
    ColdSpell,
}

impl EteKind {
    /// Season the definition operates in: heat waves in the warm period,
    /// cold spells in the cold period.
    pub fn season(&self) -> Season {
        match self {
            EteKind::HeatWave => Season::Warm,
            EteKind::ColdSpell => Season::Cold,
        }
    }

    fn prefix(&self) -> &'static str {
        match self {
            EteKind::HeatWave => "HW",
            EteKind::ColdSpell => "CS",
        }
    }
}

/// One event definition, e.g. heat wave above the 92.5th percentile lasting
/// at least 3 consecutive days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EteDefinition {
    pub kind: EteKind,
    pub percentile: f64,
    pub min_duration: usize,
}

impl EteDefinition {
    pub fn new(kind: EteKind, percentile: f64, min_duration: usize) -> Result<Self, DetectError> {
        if !(percentile > 0.0 && percentile < 100.0) {
            return Err(DetectError::BadPercentile(percentile.to_string()));
        }
        if min_duration == 0 {
            return Err(DetectError::BadDuration);
        }
        Ok(Self {
            kind,
            percentile,
            min_duration,
        })
    }

    /// Canonical name, e.g. `HW_92.5P_3d` / `CS_5P_2d`.
    pub fn name(&self) -> String {
        format!(
            "{}_{}P_{}d",
            self.kind.prefix(),
            self.percentile,
            self.min_duration
        )
    }

    /// Human-readable description in the reporting style of the summary
    /// table, e.g. "Heat wave >90th percentile with >= 2 days duration".
    pub fn description(&self) -> String {
        let ord = ordinal(self.percentile);
        match self.kind {
            EteKind::HeatWave => format!(
                "Heat wave >{ord} percentile with >= {} days duration",
                self.min_duration
            ),
            EteKind::ColdSpell => format!(
                "Cold spell <{ord} percentile with >= {} days duration",
                self.min_duration
            ),
        }
    }

    fn exceeds(&self, temp: f64, threshold: f64) -> bool {
        match self.kind {
            EteKind::HeatWave => temp > threshold,
            EteKind::ColdSpell => temp < threshold,
        }
    }
}

fn ordinal(p: f64) -> String {
    let suffix = if p.fract() == 0.0 {
        match (p as i64) % 10 {
            1 if p as i64 % 100 != 11 => "st",
            2 if p as i64 % 100 != 12 => "nd",
            3 if p as i64 % 100 != 13 => "rd",
            _ => "th",
        }
    } else {
        "th"
    };
    format!("{p}{suffix}")
}

impl fmt::Display for EteDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EteDefinition {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DetectError::BadName(s.to_string());
        let mut parts = s.split('_');
        let kind = match parts.next().ok_or_else(err)? {
            "HW" => EteKind::HeatWave,
            "CS" => EteKind::ColdSpell,
            _ => return Err(err()),
        };
        let percentile = parts
            .next()
            .and_then(|p| p.strip_suffix('P'))
            .and_then(|p| p.parse::<f64>().ok())
            .ok_or_else(err)?;
        let duration = parts
            .next()
            .and_then(|d| d.strip_suffix('d'))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(err)?;
        if parts.next().is_some() {
            return Err(err());
        }
        EteDefinition::new(kind, percentile, duration).map_err(|_| err())
    }
}

impl Serialize for EteDefinition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for EteDefinition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::data::de_from_str(d)
    }
}

/// The full definition set: 12 heat-wave definitions (4 percentiles x 3
/// durations) followed by 9 cold-spell definitions (3 percentiles x 3
/// durations), in summary-table order.
pub fn all_definitions() -> Vec<EteDefinition> {
    let mut defs = Vec::with_capacity(21);
    for &p in &[90.0, 92.5, 95.0, 97.5] {
        for d in 2..=4 {
            defs.push(EteDefinition::new(EteKind::HeatWave, p, d).expect("valid"));
        }
    }
    for &p in &[3.0, 5.0, 10.0] {
        for d in 2..=4 {
            defs.push(EteDefinition::new(EteKind::ColdSpell, p, d).expect("valid"));
        }
    }
    defs
}

/// Which days enter the percentile computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PercentileScope {
    /// All days of the study period (default).
    #[default]
    Full,
    /// Only days inside the definition's season.
    Season,
}

/// Percentile threshold in degrees Celsius for a definition.
pub fn compute_threshold(
    series: &DailySeries,
    definition: &EteDefinition,
    scope: PercentileScope,
) -> Result<f64, DetectError> {
    let temps: Vec<f64> = match scope {
        PercentileScope::Full => series.temps(),
        PercentileScope::Season => series
            .records()
            .iter()
            .filter(|r| season_of(r.date) == definition.kind.season())
            .map(|r| r.temp_mean)
            .collect(),
    };
    quantile(&temps, definition.percentile).ok_or(DetectError::EmptySeries)
}

/// Date-aligned 0/1 event indicator for one definition.
#[derive(Debug, Clone, PartialEq)]
pub struct EteIndicator {
    pub definition: EteDefinition,
    pub threshold: f64,
    pub start: chrono::NaiveDate,
    pub flags: Vec<bool>,
}

impl EteIndicator {
    pub fn flagged_days(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Detect event days: in-season threshold exceedances grouped into maximal
/// consecutive runs, keeping only runs of at least `min_duration` days.
pub fn detect(
    series: &DailySeries,
    definition: &EteDefinition,
    scope: PercentileScope,
) -> Result<EteIndicator, DetectError> {
    let threshold = compute_threshold(series, definition, scope)?;
    let season = definition.kind.season();
    let exceed: Vec<bool> = series
        .records()
        .iter()
        .map(|r| season_of(r.date) == season && definition.exceeds(r.temp_mean, threshold))
        .collect();
    let flags = keep_long_runs(&exceed, definition.min_duration);
    Ok(EteIndicator {
        definition: *definition,
        threshold,
        start: series.start(),
        flags,
    })
}

/// Zero out maximal runs of `true` shorter than `min_duration`.
fn keep_long_runs(mask: &[bool], min_duration: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let mut j = i;
            while j < mask.len() && mask[j] {
                j += 1;
            }
            if j - i >= min_duration {
                out[i..j].fill(true);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Event days per calendar year, summarized across years. Each flagged day
/// counts toward its own calendar year even when a run crosses Dec 31.
pub fn event_day_stats(indicator: &EteIndicator) -> Result<Summary, DetectError> {
    if indicator.flags.len() < 365 {
        return Err(DetectError::ShortIndicator);
    }
    let end = indicator.start + chrono::Days::new(indicator.flags.len() as u64 - 1);
    let first_year = indicator.start.year();
    let last_year = end.year();
    let mut per_year = vec![0.0; (last_year - first_year + 1) as usize];
    let mut date = indicator.start;
    for &flag in &indicator.flags {
        if flag {
            per_year[(date.year() - first_year) as usize] += 1.0;
        }
        date = date.succ_opt().expect("date range");
    }
    Ok(summarize_slice(&per_year))
}
