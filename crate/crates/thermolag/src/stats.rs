//! Five-number descriptive summary used by the tabular outputs.

use serde::{Deserialize, Serialize};

use crate::quantile::quantile;

/// Mean, sample standard deviation (n-1 denominator), min, median, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Summary over a non-empty slice. Median uses the shared linear-interpolation
/// quantile at p = 50; sd is 0 for a single observation.
pub fn summarize_slice(values: &[f64]) -> Summary {
    assert!(!values.is_empty(), "summary of empty slice");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let median = quantile(values, 50.0).expect("non-empty");
    Summary {
        mean,
        sd,
        min,
        median,
        max,
    }
}
