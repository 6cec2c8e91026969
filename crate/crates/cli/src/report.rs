//! Report structures and their CSV / JSON serializations.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use neurometry_core::accuracy::{AccuracyTable, MEASUREMENT_NAMES};
use neurometry_core::matching::MatchResult;
use neurometry_core::metrics::{SegMetrics, Tally, METRIC_NAMES};
use neurometry_core::morphometry::Measurements;

pub const MEASUREMENTS_HEADER: [&str; 9] = [
    "image_id",
    "instance_id",
    "source",
    "length_px",
    "width_px",
    "area_px2",
    "min_intensity",
    "mean_intensity",
    "max_intensity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Gt,
    Pred,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Gt => "gt",
            Source::Pred => "pred",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub image_id: String,
    pub instance_id: u32,
    pub source: Source,
    pub measurements: Measurements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Pool TP/FP/FN counts and IoU sums over all images.
    Micro,
    /// Unweighted mean of per-image metrics.
    PerImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub threshold: f64,
    pub connectivity: u8,
    pub resize: Option<(usize, usize)>,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image_id: String,
    pub metrics: SegMetrics,
    pub tally: Tally,
    pub matches: MatchResult,
    /// Instance ids whose masks vanished at the working resolution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_gt: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_pred: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub image_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub settings: Settings,
    pub per_image: Vec<ImageReport>,
    pub dataset: SegMetrics,
    pub measurements: Vec<MeasurementRecord>,
    /// Absent when no cell was matched.
    pub accuracy: Option<AccuracyTable>,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
}

pub fn standard_notes(aggregation: Aggregation) -> Vec<String> {
    let agg = match aggregation {
        Aggregation::Micro => {
            "dataset metrics pool TP/FP/FN counts and IoU sums over all images (micro aggregation)"
        }
        Aggregation::PerImage => "dataset metrics are unweighted means of per-image metrics",
    };
    vec![
        agg.to_string(),
        "iou_accuracy is the mean IoU over matched pairs and equals sq".to_string(),
        "pixel_accuracy is this tool's candidate for an overall accuracy: agreement of the \
         foreground unions over all pixels"
            .to_string(),
        "measurement accuracy per pair is 100*min/max; overall_macro averages the six \
         per-measurement accuracies, overall_micro averages every cell-measurement score"
            .to_string(),
        "ratios with a zero denominator are reported as 0 and listed under `undefined`".to_string(),
    ]
}

/// Two-decimal rendering with ties rounded away from zero.
pub fn fmt2(v: f64) -> String {
    format!("{:.2}", (v * 100.0).round() / 100.0)
}

pub fn write_measurements_csv(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(MEASUREMENTS_HEADER)?;
    for r in records {
        let m = &r.measurements;
        w.write_record([
            r.image_id.clone(),
            r.instance_id.to_string(),
            r.source.label().to_string(),
            m.length.to_string(),
            m.width.to_string(),
            m.area.to_string(),
            m.min_intensity.to_string(),
            fmt2(m.mean_intensity),
            m.max_intensity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv(path: &Path, metrics: &SegMetrics) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["metric", "value_percent"])?;
    for (name, v) in METRIC_NAMES.iter().zip(metrics.values()) {
        w.write_record([name.to_string(), fmt2(100.0 * v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Header only when there is no table (no matched cells).
pub fn write_accuracy_csv(path: &Path, table: Option<&AccuracyTable>) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["metric", "accuracy_percent"])?;
    if let Some(t) = table {
        for (name, v) in MEASUREMENT_NAMES.iter().zip(t.per_metric.as_array()) {
            w.write_record([name.to_string(), fmt2(v)])?;
        }
        w.write_record(["overall_macro".to_string(), fmt2(t.overall_macro)])?;
        w.write_record(["overall_micro".to_string(), fmt2(t.overall_micro)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json(path: &Path, bundle: &ReportBundle) -> Result<()> {
    let text = serde_json::to_string_pretty(bundle)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_report_json(path: &Path) -> Result<ReportBundle> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_decimal_formatting() {
        assert_eq!(fmt2(50.0), "50.00");
        assert_eq!(fmt2(75.648333), "75.65");
        assert_eq!(fmt2(12.125), "12.13");
        assert_eq!(fmt2(100.0 * (2.0 / 3.0)), "66.67");
    }
}
