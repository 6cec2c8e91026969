//! Detection and segmentation scores computed from match results.
//!
//! Every ratio whose denominator is zero is reported as 0 and its name is
//! listed in [`SegMetrics::undefined`], so an empty image never scores as
//! perfect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::BinaryMask;
use crate::matching::MatchResult;

/// Poolable counts behind [`SegMetrics`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou_sum: f64,
    pub agree_pixels: u64,
    pub total_pixels: u64,
}

impl Tally {
    pub fn from_match(m: &MatchResult) -> Self {
        Tally {
            tp: m.pairs.len() as u64,
            fp: m.unmatched_pred.len() as u64,
            fn_: m.unmatched_gt.len() as u64,
            iou_sum: m.pairs.iter().map(|p| p.iou).sum(),
            agree_pixels: 0,
            total_pixels: 0,
        }
    }

    /// Adds pixel agreement between the union masks of one image.
    pub fn with_pixels(mut self, gt_union: &BinaryMask, pred_union: &BinaryMask) -> Result<Self> {
        let (agree, total) = pixel_agreement(gt_union, pred_union)?;
        self.agree_pixels += agree;
        self.total_pixels += total;
        Ok(self)
    }

    pub fn merge(&self, other: &Tally) -> Tally {
        Tally {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            iou_sum: self.iou_sum + other.iou_sum,
            agree_pixels: self.agree_pixels + other.agree_pixels,
            total_pixels: self.total_pixels + other.total_pixels,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean IoU over matched pairs (identical to `sq`).
    pub iou_accuracy: f64,
    pub sq: f64,
    pub rq: f64,
    pub pq: f64,
    /// Fraction of pixels on which the foreground unions agree.
    pub pixel_accuracy: f64,
    /// Fields whose ratio had a zero denominator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

/// Names and values in report order.
pub const METRIC_NAMES: [&str; 8] = [
    "precision",
    "recall",
    "f1",
    "iou_accuracy",
    "sq",
    "rq",
    "pq",
    "pixel_accuracy",
];

impl SegMetrics {
    pub fn from_tally(t: &Tally) -> Self {
        let mut undefined = Vec::new();
        let mut ratio = |name: &str, num: f64, den: f64| {
            if den == 0.0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num / den
            }
        };
        let (tp, fp, fn_) = (t.tp as f64, t.fp as f64, t.fn_ as f64);
        let precision = ratio("precision", tp, tp + fp);
        let recall = ratio("recall", tp, tp + fn_);
        let f1 = ratio("f1", 2.0 * precision * recall, precision + recall);
        let sq = ratio("sq", t.iou_sum, tp);
        let rq = ratio("rq", tp, tp + 0.5 * fp + 0.5 * fn_);
        let pixel_accuracy = ratio(
            "pixel_accuracy",
            t.agree_pixels as f64,
            t.total_pixels as f64,
        );
        if undefined.iter().any(|n| n == "sq") {
            undefined.push("iou_accuracy".into());
        }
        if undefined.iter().any(|n| n == "sq" || n == "rq") {
            undefined.push("pq".into());
        }
        undefined.sort_by_key(|n| METRIC_NAMES.iter().position(|m| m == n));
        undefined.dedup();
        SegMetrics {
            precision,
            recall,
            f1,
            iou_accuracy: sq,
            sq,
            rq,
            pq: sq * rq,
            pixel_accuracy,
            undefined,
        }
    }

    pub fn values(&self) -> [f64; 8] {
        [
            self.precision,
            self.recall,
            self.f1,
            self.iou_accuracy,
            self.sq,
            self.rq,
            self.pq,
            self.pixel_accuracy,
        ]
    }

    /// Unweighted mean of each field over per-image metrics. A field is
    /// undefined only if it is undefined for every image.
    pub fn mean_of(items: &[SegMetrics]) -> SegMetrics {
        if items.is_empty() {
            return SegMetrics::from_tally(&Tally::default());
        }
        let n = items.len() as f64;
        let mut sums = [0.0; 8];
        for m in items {
            for (s, v) in sums.iter_mut().zip(m.values()) {
                *s += v;
            }
        }
        let [precision, recall, f1, iou_accuracy, sq, rq, pq, pixel_accuracy] = sums.map(|s| s / n);
        let undefined = METRIC_NAMES
            .iter()
            .filter(|name| items.iter().all(|m| m.undefined.iter().any(|u| u == *name)))
            .map(|s| s.to_string())
            .collect();
        SegMetrics {
            precision,
            recall,
            f1,
            iou_accuracy,
            sq,
            rq,
            pq,
            pixel_accuracy,
            undefined,
        }
    }
}

/// Scores from a match result alone. No pixel data is available here, so
/// `pixel_accuracy` is 0 and flagged undefined; use [`Tally::with_pixels`]
/// to include it.
pub fn segmentation_metrics(m: &MatchResult) -> SegMetrics {
    SegMetrics::from_tally(&Tally::from_match(m))
}

fn pixel_agreement(gt: &BinaryMask, pred: &BinaryMask) -> Result<(u64, u64)> {
    if gt.dims() != pred.dims() {
        return Err(Error::mismatch(gt.dims(), pred.dims()));
    }
    let agree = gt
        .bits()
        .iter()
        .zip(pred.bits())
        .filter(|(a, b)| a == b)
        .count() as u64;
    Ok((agree, gt.bits().len() as u64))
}

/// (foreground agreements + background agreements) / total pixels.
pub fn pixel_accuracy(gt_union: &BinaryMask, pred_union: &BinaryMask) -> Result<f64> {
    let (agree, total) = pixel_agreement(gt_union, pred_union)?;
    Ok(crate::masks::ratio(agree, total))
}
