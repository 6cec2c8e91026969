//! Agreement between predicted and ground-truth measurements of matched cells.
//!
//! Per pair and per quantity the score is `100 * min / max` (100 when both
//! are zero). Scores are averaged per quantity over all pairs; the overall
//! figure is reported both as the mean of the six per-quantity averages
//! (macro) and as the mean over every cell-quantity score (micro).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphometry::Measurements;

pub const MEASUREMENT_NAMES: [&str; 6] = [
    "length",
    "width",
    "area",
    "min_intensity",
    "mean_intensity",
    "max_intensity",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerMetric {
    pub length: f64,
    pub width: f64,
    pub area: f64,
    pub min_intensity: f64,
    pub mean_intensity: f64,
    pub max_intensity: f64,
}

impl PerMetric {
    pub fn from_array(v: [f64; 6]) -> Self {
        let [length, width, area, min_intensity, mean_intensity, max_intensity] = v;
        PerMetric {
            length,
            width,
            area,
            min_intensity,
            mean_intensity,
            max_intensity,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.length,
            self.width,
            self.area,
            self.min_intensity,
            self.mean_intensity,
            self.max_intensity,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub per_metric: PerMetric,
    pub overall_macro: f64,
    pub overall_micro: f64,
    pub n_pairs: usize,
}

/// Percent agreement `100 * min(pred, gt) / max(pred, gt)`.
pub fn pair_accuracy(pred: f64, gt: f64) -> Result<f64> {
    if !(pred.is_finite() && gt.is_finite()) || pred < 0.0 || gt < 0.0 {
        return Err(Error::InvalidValue(format!(
            "measurements must be finite and non-negative, got pred={pred} gt={gt}"
        )));
    }
    let hi = pred.max(gt);
    if hi == 0.0 {
        return Ok(100.0);
    }
    Ok(100.0 * pred.min(gt) / hi)
}

/// Arithmetic mean of the six per-quantity accuracies.
pub fn macro_mean(per_metric: &[f64; 6]) -> f64 {
    per_metric.iter().sum::<f64>() / 6.0
}

pub fn measurement_accuracy(pairs: &[(Measurements, Measurements)]) -> Result<AccuracyTable> {
    if pairs.is_empty() {
        return Err(Error::InvalidValue(
            "measurement accuracy needs at least one matched pair".into(),
        ));
    }
    let mut sums = [0.0f64; 6];
    for (gt, pred) in pairs {
        let (g, p) = (gt.as_array(), pred.as_array());
        for k in 0..6 {
            sums[k] += pair_accuracy(p[k], g[k])?;
        }
    }
    let n = pairs.len() as f64;
    let per_metric = sums.map(|s| s / n);
    Ok(AccuracyTable {
        per_metric: PerMetric::from_array(per_metric),
        overall_macro: macro_mean(&per_metric),
        overall_micro: sums.iter().sum::<f64>() / (6.0 * n),
        n_pairs: pairs.len(),
    })
}
