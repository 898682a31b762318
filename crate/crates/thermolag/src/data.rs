//! Daily time-series ingestion and calendar features.
//!
//! Input CSV contract (shared by every CLI subcommand): UTF-8, comma
//! separated, ISO-8601 dates, `.` decimal separator, `holiday` in {0,1},
//! and at least one pre-aggregated death-count column named
//! `deaths_<cause>_<sex>` with sex in {all, female, male}. The series must
//! be gap-free; missing weather values are a parse error, not imputed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::stats::{summarize_slice, Summary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("no death-count column found (need at least one 'deaths_<cause>_<sex>')")]
    NoDeathColumns,
    #[error("unrecognized column '{0}'")]
    UnknownColumn(String),
    #[error("date gap: expected {0}")]
    DateGap(NaiveDate),
    #[error("dates out of order at line {row}")]
    NonChronological { row: usize },
    #[error("line {row}, column '{col}': value is not numeric")]
    NonNumericCell { row: usize, col: String },
    #[error("line {row}, column '{col}': negative count")]
    NegativeCount { row: usize, col: String },
    #[error("line {row}, column '{col}': {msg}")]
    OutOfRange {
        row: usize,
        col: String,
        msg: String,
    },
    #[error("line {row}: invalid date '{value}' (expected YYYY-MM-DD)")]
    InvalidDate { row: usize, value: String },
    #[error("series is empty")]
    EmptySeries,
    #[error("death-count columns differ across days at {date}")]
    InconsistentStrata { date: NaiveDate },
    #[error("malformed CSV at line {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("unknown stratum '{0}'")]
    UnknownStratum(String),
}

/// Cause-of-death grouping. The fixed variants mirror the ICD-10 groupings
/// the analysis reports on; counts arrive pre-aggregated, so these are labels
/// only and arbitrary extra groupings are allowed through `Custom`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cause {
    Cvd,
    Resp,
    Cbd,
    Is,
    Hs,
    Ihd,
    Copd,
    Custom(String),
}

impl Cause {
    pub fn label(&self) -> &str {
        match self {
            Cause::Cvd => "cvd",
            Cause::Resp => "resp",
            Cause::Cbd => "cbd",
            Cause::Is => "is",
            Cause::Hs => "hs",
            Cause::Ihd => "ihd",
            Cause::Copd => "copd",
            Cause::Custom(s) => s,
        }
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Cause {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "cvd" => Cause::Cvd,
            "resp" => Cause::Resp,
            "cbd" => Cause::Cbd,
            "is" => Cause::Is,
            "hs" => Cause::Hs,
            "ihd" => Cause::Ihd,
            "copd" => Cause::Copd,
            other => Cause::Custom(other.to_string()),
        })
    }
}

impl Serialize for Cause {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Cause {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().expect("infallible"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    All,
    Female,
    Male,
}

impl Sex {
    pub fn label(&self) -> &'static str {
        match self {
            Sex::All => "all",
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Sex::All),
            "female" => Ok(Sex::Female),
            "male" => Ok(Sex::Male),
            other => Err(format!("unknown sex '{other}' (expected all|female|male)")),
        }
    }
}

/// One mortality stratum: (cause, sex).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StratumKey {
    pub cause: Cause,
    pub sex: Sex,
}

impl StratumKey {
    pub fn new(cause: Cause, sex: Sex) -> Self {
        Self { cause, sex }
    }

    pub fn column_name(&self) -> String {
        format!("deaths_{}_{}", self.cause, self.sex)
    }

    /// Parse from a `deaths_<cause>_<sex>` column header. The sex is the
    /// final underscore-separated segment, so custom cause labels may carry
    /// underscores.
    pub fn from_column_name(name: &str) -> Option<Self> {
        let rest = name.strip_prefix("deaths_")?;
        let (cause, sex) = rest.rsplit_once('_')?;
        if cause.is_empty() {
            return None;
        }
        let sex = Sex::from_str(sex).ok()?;
        Some(Self::new(cause.parse().expect("infallible"), sex))
    }
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.cause, self.sex)
    }
}

/// One calendar day of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub deaths: BTreeMap<StratumKey, u32>,
    pub temp_mean: f64,
    pub rh: f64,
    pub pm10: f64,
    pub holiday: bool,
}

/// Gap-free, date-ordered daily series.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    records: Vec<DailyRecord>,
}

impl DailySeries {
    /// Validates: non-empty, one record per consecutive calendar day, the
    /// same stratum set on every day, and finite weather values.
    pub fn new(records: Vec<DailyRecord>) -> Result<Self, IngestError> {
        if records.is_empty() {
            return Err(IngestError::EmptySeries);
        }
        let keys: Vec<StratumKey> = records[0].deaths.keys().cloned().collect();
        for (i, rec) in records.iter().enumerate() {
            if i > 0 {
                let expected = records[i - 1]
                    .date
                    .checked_add_days(Days::new(1))
                    .expect("date range");
                if rec.date != expected {
                    return Err(IngestError::DateGap(expected));
                }
            }
            if rec.deaths.len() != keys.len()
                || !rec.deaths.keys().zip(keys.iter()).all(|(a, b)| a == b)
            {
                return Err(IngestError::InconsistentStrata { date: rec.date });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start(&self) -> NaiveDate {
        self.records[0].date
    }

    pub fn end(&self) -> NaiveDate {
        self.records[self.records.len() - 1].date
    }

    /// Stratum keys in stable (cause, sex) order.
    pub fn strata(&self) -> Vec<StratumKey> {
        self.records[0].deaths.keys().cloned().collect()
    }

    pub fn temps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.temp_mean).collect()
    }

    pub fn counts(&self, key: &StratumKey) -> Result<Vec<f64>, IngestError> {
        if !self.records[0].deaths.contains_key(key) {
            return Err(IngestError::UnknownStratum(key.to_string()));
        }
        Ok(self
            .records
            .iter()
            .map(|r| f64::from(r.deaths[key]))
            .collect())
    }

    /// Series length in years (365.25-day years).
    pub fn span_years(&self) -> f64 {
        self.records.len() as f64 / 365.25
    }
}

/// {warm: Sep-Mar, cold: Apr-Aug} split of the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Warm,
    Cold,
}

pub fn season_of(date: NaiveDate) -> Season {
    match date.month() {
        4..=8 => Season::Cold,
        _ => Season::Warm,
    }
}

/// Label year of the season the day belongs to: the year containing the
/// season's first day (Sep 1 for warm, Apr 1 for cold).
pub fn season_year_of(date: NaiveDate) -> i32 {
    match season_of(date) {
        Season::Cold => date.year(),
        Season::Warm => {
            if date.month() >= 9 {
                date.year()
            } else {
                date.year() - 1
            }
        }
    }
}

fn season_start(date: NaiveDate) -> NaiveDate {
    match season_of(date) {
        Season::Cold => NaiveDate::from_ymd_opt(date.year(), 4, 1).expect("valid"),
        Season::Warm => NaiveDate::from_ymd_opt(season_year_of(date), 9, 1).expect("valid"),
    }
}

/// 1-based day index within the current season.
pub fn day_of_season(date: NaiveDate) -> u32 {
    (date - season_start(date)).num_days() as u32 + 1
}

/// Per-day model covariates derived from the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarFeatures {
    /// 0-based day count from the series start.
    pub time_index: usize,
    /// 0 = Monday ... 6 = Sunday.
    pub dow: u8,
    pub holiday: bool,
    pub season: Season,
    pub dos: u32,
    pub season_year: i32,
}

pub fn calendar_features(series: &DailySeries) -> Vec<CalendarFeatures> {
    series
        .records()
        .iter()
        .enumerate()
        .map(|(i, rec)| CalendarFeatures {
            time_index: i,
            dow: rec.date.weekday().num_days_from_monday() as u8,
            holiday: rec.holiday,
            season: season_of(rec.date),
            dos: day_of_season(rec.date),
            season_year: season_year_of(rec.date),
        })
        .collect()
}

/// Five-number summary of a stratum's daily counts.
pub fn summarize(series: &DailySeries, key: &StratumKey) -> Result<Summary, IngestError> {
    let counts = series.counts(key)?;
    Ok(summarize_slice(&counts))
}

const REQUIRED_COLUMNS: [&str; 5] = ["date", "temp_mean", "rh", "pm10", "holiday"];

/// Parse a series from CSV. All validation errors name the offending line
/// (1-based, counting the header as line 1) and column.
pub fn parse_series<Rd: Read>(reader: Rd) -> Result<DailySeries, IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|e| IngestError::Malformed {
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let mut col_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, name) in headers.iter().enumerate() {
        col_index.insert(name, i);
    }
    for required in REQUIRED_COLUMNS {
        if !col_index.contains_key(required) {
            return Err(IngestError::MissingColumn(required.to_string()));
        }
    }
    let mut death_cols: Vec<(usize, StratumKey)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if REQUIRED_COLUMNS.contains(&name) {
            continue;
        }
        match StratumKey::from_column_name(name) {
            Some(key) => death_cols.push((i, key)),
            None => return Err(IngestError::UnknownColumn(name.to_string())),
        }
    }
    if death_cols.is_empty() {
        return Err(IngestError::NoDeathColumns);
    }

    let date_idx = col_index["date"];
    let temp_idx = col_index["temp_mean"];
    let rh_idx = col_index["rh"];
    let pm10_idx = col_index["pm10"];
    let holiday_idx = col_index["holiday"];

    let mut records: Vec<DailyRecord> = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::Malformed {
            row: line,
            msg: e.to_string(),
        })?;
        let raw_date = row.get(date_idx).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            IngestError::InvalidDate {
                row: line,
                value: raw_date.to_string(),
            }
        })?;
        if let Some(prev) = records.last() {
            let expected = prev
                .date
                .checked_add_days(Days::new(1))
                .expect("date range");
            if date < expected {
                return Err(IngestError::NonChronological { row: line });
            }
            if date > expected {
                return Err(IngestError::DateGap(expected));
            }
        }

        let temp_mean = parse_float(&row, temp_idx, line, "temp_mean")?;
        let rh = parse_float(&row, rh_idx, line, "rh")?;
        if !(0.0..=100.0).contains(&rh) {
            return Err(IngestError::OutOfRange {
                row: line,
                col: "rh".into(),
                msg: format!("relative humidity {rh} outside [0, 100]"),
            });
        }
        let pm10 = parse_float(&row, pm10_idx, line, "pm10")?;
        if pm10 < 0.0 {
            return Err(IngestError::OutOfRange {
                row: line,
                col: "pm10".into(),
                msg: format!("PM10 {pm10} is negative"),
            });
        }
        let holiday = match row.get(holiday_idx).unwrap_or("").trim() {
            "0" => false,
            "1" => true,
            _ => {
                return Err(IngestError::NonNumericCell {
                    row: line,
                    col: "holiday".into(),
                })
            }
        };

        let mut deaths = BTreeMap::new();
        for (idx, key) in &death_cols {
            let col = headers.get(*idx).unwrap_or("").to_string();
            let raw = row.get(*idx).unwrap_or("").trim();
            let value: f64 = raw.parse().map_err(|_| IngestError::NonNumericCell {
                row: line,
                col: col.clone(),
            })?;
            if !value.is_finite() || value.fract() != 0.0 {
                return Err(IngestError::NonNumericCell { row: line, col });
            }
            if value < 0.0 {
                return Err(IngestError::NegativeCount { row: line, col });
            }
            deaths.insert(key.clone(), value as u32);
        }

        records.push(DailyRecord {
            date,
            deaths,
            temp_mean,
            rh,
            pm10,
            holiday,
        });
    }

    DailySeries::new(records)
}

fn parse_float(
    row: &csv::StringRecord,
    idx: usize,
    line: usize,
    col: &str,
) -> Result<f64, IngestError> {
    let raw = row.get(idx).unwrap_or("").trim();
    let value: f64 = raw.parse().map_err(|_| IngestError::NonNumericCell {
        row: line,
        col: col.to_string(),
    })?;
    if !value.is_finite() {
        return Err(IngestError::NonNumericCell {
            row: line,
            col: col.to_string(),
        });
    }
    Ok(value)
}

/// Serialize back to the input CSV schema. Floats use the shortest
/// round-trip representation, so parse -> write -> parse is the identity.
pub fn write_csv<W: Write>(series: &DailySeries, mut out: W) -> std::io::Result<()> {
    let strata = series.strata();
    let mut header = String::from("date,temp_mean,rh,pm10,holiday");
    for key in &strata {
        header.push(',');
        header.push_str(&key.column_name());
    }
    writeln!(out, "{header}")?;
    for rec in series.records() {
        let mut line = format!(
            "{},{},{},{},{}",
            rec.date.format("%Y-%m-%d"),
            rec.temp_mean,
            rec.rh,
            rec.pm10,
            u8::from(rec.holiday)
        );
        for key in &strata {
            line.push(',');
            line.push_str(&rec.deaths[key].to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn to_csv_string(series: &DailySeries) -> String {
    let mut buf = Vec::new();
    write_csv(series, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 output")
}

pub(crate) fn de_from_str<'de, T, D>(d: D) -> Result<T, D::Error>
where
    T: FromStr,
    T::Err: fmt::Display,
    D: Deserializer<'de>,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(de::Error::custom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn simple_csv(rows: &[(&str, f64)]) -> String {
        let mut s = String::from("date,temp_mean,rh,pm10,holiday,deaths_cvd_all\n");
        for (d, t) in rows {
            s.push_str(&format!("{d},{t},80,35,0,3\n"));
        }
        s
    }

    #[test]
    fn two_row_parse() {
        let csv = simple_csv(&[("2006-01-01", 20.0), ("2006-01-02", 21.5)]);
        let series = parse_series(csv.as_bytes()).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series.start(), date(2006, 1, 1));
        assert_eq!(series.end(), date(2006, 1, 2));
        assert_eq!(series.records()[1].temp_mean, 21.5);
    }

    #[test]
    fn date_gap_names_missing_day() {
        let csv = simple_csv(&[("2006-01-01", 20.0), ("2006-01-03", 21.0)]);
        let err = parse_series(csv.as_bytes()).unwrap_err();
        assert_eq!(err, IngestError::DateGap(date(2006, 1, 2)));
    }

    #[test]
    fn ten_year_series_has_expected_length() {
        // independent calendar enumeration, leap years 2008 and 2012 included
        let mut d = date(2006, 1, 1);
        let end = date(2015, 12, 31);
        let mut rows = Vec::new();
        let mut oracle_days = 0usize;
        while d <= end {
            rows.push((d.format("%Y-%m-%d").to_string(), 20.0));
            oracle_days += 1;
            d = d.succ_opt().unwrap();
        }
        assert_eq!(oracle_days, 3652);
        let refs: Vec<(&str, f64)> = rows.iter().map(|(s, t)| (s.as_str(), *t)).collect();
        let series = parse_series(simple_csv(&refs).as_bytes()).unwrap();
        assert_eq!(series.len(), 3652);
        assert_abs_diff_eq!(series.span_years(), 10.0, epsilon = 0.01);
    }

    #[test]
    fn parse_error_locations() {
        let base = "date,temp_mean,rh,pm10,holiday,deaths_cvd_all\n";
        let bad_cell = format!("{base}2006-01-01,20,80,35,0,oops\n");
        assert_eq!(
            parse_series(bad_cell.as_bytes()).unwrap_err(),
            IngestError::NonNumericCell {
                row: 2,
                col: "deaths_cvd_all".into()
            }
        );
        let negative = format!("{base}2006-01-01,20,80,35,0,-3\n");
        assert_eq!(
            parse_series(negative.as_bytes()).unwrap_err(),
            IngestError::NegativeCount {
                row: 2,
                col: "deaths_cvd_all".into()
            }
        );
        let missing = "date,temp_mean,rh,holiday,deaths_cvd_all\n";
        assert_eq!(
            parse_series(missing.as_bytes()).unwrap_err(),
            IngestError::MissingColumn("pm10".into())
        );
        let bad_rh = format!("{base}2006-01-01,20,130,35,0,3\n");
        assert!(matches!(
            parse_series(bad_rh.as_bytes()).unwrap_err(),
            IngestError::OutOfRange { row: 2, .. }
        ));
        let out_of_order = format!("{base}2006-01-02,20,80,35,0,3\n2006-01-01,20,80,35,0,3\n");
        assert_eq!(
            parse_series(out_of_order.as_bytes()).unwrap_err(),
            IngestError::NonChronological { row: 3 }
        );
    }

    #[test]
    fn stratum_key_column_names() {
        let key = StratumKey::new(Cause::Is, Sex::Male);
        assert_eq!(key.column_name(), "deaths_is_male");
        assert_eq!(StratumKey::from_column_name("deaths_is_male").unwrap(), key);
        let custom = StratumKey::from_column_name("deaths_all_cause_female").unwrap();
        assert_eq!(custom.cause, Cause::Custom("all_cause".into()));
        assert_eq!(custom.sex, Sex::Female);
        assert!(StratumKey::from_column_name("deaths_cvd").is_none());
        assert!(StratumKey::from_column_name("temp_mean").is_none());
    }

    #[test]
    fn season_boundaries() {
        assert_eq!(season_of(date(2006, 9, 1)), Season::Warm);
        assert_eq!(day_of_season(date(2006, 9, 1)), 1);
        assert_eq!(season_of(date(2006, 4, 15)), Season::Cold);
        assert_eq!(day_of_season(date(2006, 4, 15)), 15);
        assert_eq!(season_of(date(2006, 3, 31)), Season::Warm);
        assert_eq!(season_of(date(2006, 8, 31)), Season::Cold);
    }

    #[test]
    fn dos_matches_brute_force_count() {
        // Sep 1 2006 -> Feb 10 2007, counted one day at a time
        let target = date(2007, 2, 10);
        let mut d = date(2006, 9, 1);
        let mut count = 1;
        while d < target {
            d = d.succ_opt().unwrap();
            count += 1;
        }
        assert_eq!(count, 163);
        assert_eq!(day_of_season(target), 163);
        assert_eq!(season_year_of(target), 2006);
        assert_eq!(season_of(target), Season::Warm);
    }

    fn synthetic_series(start: NaiveDate, days: usize) -> DailySeries {
        let key = StratumKey::new(Cause::Cvd, Sex::All);
        let records: Vec<DailyRecord> = (0..days)
            .map(|i| {
                let d = start.checked_add_days(Days::new(i as u64)).unwrap();
                DailyRecord {
                    date: d,
                    deaths: BTreeMap::from([(key.clone(), (i % 7) as u32)]),
                    temp_mean: 15.0 + (i % 20) as f64 * 0.31,
                    rh: 70.0 + (i % 9) as f64,
                    pm10: 30.0 + (i % 13) as f64 * 0.7,
                    holiday: i % 50 == 0,
                }
            })
            .collect();
        DailySeries::new(records).unwrap()
    }

    #[test]
    fn calendar_features_partition_and_reset() {
        let series = synthetic_series(date(2006, 1, 1), 3652);
        let feats = calendar_features(&series);
        assert_eq!(feats.len(), 3652);
        for (i, f) in feats.iter().enumerate() {
            assert_eq!(f.time_index, i);
            if i > 0 {
                let prev = &feats[i - 1];
                if f.season == prev.season {
                    assert_eq!(f.dos, prev.dos + 1, "dos must increment inside a season");
                    assert_eq!(f.season_year, prev.season_year);
                } else {
                    assert_eq!(f.dos, 1, "dos must reset at a season boundary");
                }
            }
        }
        // every day belongs to exactly one season by construction of the
        // month partition; spot-check the boundary months
        let rec_dates: Vec<NaiveDate> = series.records().iter().map(|r| r.date).collect();
        for (d, f) in rec_dates.iter().zip(feats.iter()) {
            let cold = (4..=8).contains(&d.month());
            assert_eq!(f.season == Season::Cold, cold);
        }
    }

    #[test]
    fn summarize_matches_hand_values() {
        let key = StratumKey::new(Cause::Cvd, Sex::All);
        let records: Vec<DailyRecord> = [1u32, 2, 3, 4, 5]
            .iter()
            .enumerate()
            .map(|(i, &c)| DailyRecord {
                date: date(2006, 1, 1)
                    .checked_add_days(Days::new(i as u64))
                    .unwrap(),
                deaths: BTreeMap::from([(key.clone(), c)]),
                temp_mean: 20.0,
                rh: 80.0,
                pm10: 35.0,
                holiday: false,
            })
            .collect();
        let series = DailySeries::new(records).unwrap();
        let s = summarize(&series, &key).unwrap();
        assert_abs_diff_eq!(s.mean, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sd, 1.5811388300841898, epsilon = 1e-12);
        assert_abs_diff_eq!(s.median, 3.0, epsilon = 1e-12);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 5.0);

        let unknown = StratumKey::new(Cause::Copd, Sex::Male);
        assert_eq!(
            summarize(&series, &unknown).unwrap_err(),
            IngestError::UnknownStratum("copd_male".into())
        );
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let series = synthetic_series(date(2010, 2, 14), 400);
        let text = to_csv_string(&series);
        let reparsed = parse_series(text.as_bytes()).unwrap();
        assert_eq!(series, reparsed);
        // and the serialized text itself is stable
        assert_eq!(text, to_csv_string(&reparsed));
    }

    proptest::proptest! {
        #[test]
        fn round_trip_holds_for_arbitrary_series(
            n in 1usize..40,
            offset in 0u64..20000,
            temps in proptest::collection::vec(-30.0..45.0f64, 40),
            rhs in proptest::collection::vec(0.0..=100.0f64, 40),
            pms in proptest::collection::vec(0.0..300.0f64, 40),
            counts in proptest::collection::vec(0u32..200, 40),
        ) {
            let start = date(1990, 1, 1) + Days::new(offset);
            let k1 = StratumKey::new(Cause::Cvd, Sex::All);
            let k2 = StratumKey::new(Cause::Custom("other_grp".into()), Sex::Male);
            let records: Vec<DailyRecord> = (0..n)
                .map(|i| DailyRecord {
                    date: start + Days::new(i as u64),
                    deaths: BTreeMap::from([
                        (k1.clone(), counts[i]),
                        (k2.clone(), counts[(i + 7) % 40]),
                    ]),
                    temp_mean: temps[i],
                    rh: rhs[i],
                    pm10: pms[i],
                    holiday: counts[i] % 5 == 0,
                })
                .collect();
            let series = DailySeries::new(records).unwrap();
            let text = to_csv_string(&series);
            let reparsed = parse_series(text.as_bytes()).unwrap();
            proptest::prop_assert_eq!(series, reparsed);
        }
    }
}
