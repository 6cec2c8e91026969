//! IoU matching of predicted instances to ground truth.
//!
//! Candidate pairs are those whose IoU strictly exceeds the threshold. They
//! are accepted greedily in order of descending IoU, ties broken by the
//! smaller ground-truth id and then the smaller prediction id, with every
//! instance used at most once. Above 0.5 each instance has at most one
//! candidate among non-overlapping counterparts, so the greedy pass is the
//! unique matching there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::Instance;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt_id: u32,
    pub pred_id: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// True positives, sorted by ground-truth id.
    pub pairs: Vec<MatchedPair>,
    /// False negatives.
    pub unmatched_gt: Vec<u32>,
    /// False positives.
    pub unmatched_pred: Vec<u32>,
}

pub fn match_instances(gt: &[Instance], pred: &[Instance], threshold: f64) -> Result<MatchResult> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidValue(format!(
            "IoU threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let dims = gt.first().or(pred.first()).map(|i| i.mask().dims());
    if let Some(d) = dims {
        if let Some(bad) = gt.iter().chain(pred).find(|i| i.mask().dims() != d) {
            return Err(Error::mismatch(d, bad.mask().dims()));
        }
    }

    let mut candidates = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            if g.bbox().intersect(&p.bbox()).is_none() {
                continue;
            }
            let iou = g.iou(p)?;
            if iou > threshold {
                candidates.push((iou, gi, pi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(gt[a.1].id().cmp(&gt[b.1].id()))
            .then(pred[a.2].id().cmp(&pred[b.2].id()))
    });

    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for (iou, gi, pi) in candidates {
        if gt_used[gi] || pred_used[pi] {
            continue;
        }
        gt_used[gi] = true;
        pred_used[pi] = true;
        pairs.push(MatchedPair {
            gt_id: gt[gi].id(),
            pred_id: pred[pi].id(),
            iou,
        });
    }
    pairs.sort_by_key(|p| (p.gt_id, p.pred_id));

    let leftovers = |items: &[Instance], used: &[bool]| {
        let mut ids: Vec<u32> = items
            .iter()
            .zip(used)
            .filter(|(_, &u)| !u)
            .map(|(i, _)| i.id())
            .collect();
        ids.sort_unstable();
        ids
    };
    Ok(MatchResult {
        pairs,
        unmatched_gt: leftovers(gt, &gt_used),
        unmatched_pred: leftovers(pred, &pred_used),
    })
}
