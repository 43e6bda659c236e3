//! Inference post-processing and proposal-quality metrics: score fusion,
//! Gaussian Soft-NMS, temporal IoU, AR@AN and the area under the AR-AN curve.
//!
//! Metric arithmetic runs in f64; proposal payloads stay f32.

use crate::par::map_indexed;
use crate::proposals::CandidateProposal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AR curve must cover a contiguous integer AN grid, missing AN={0}")]
    NonContiguousCurve(usize),
    #[error("AR curve is empty")]
    EmptyCurve,
    #[error("results reference unknown video id `{0}`")]
    IdMismatch(String),
}

/// A proposal after score fusion: interval plus a single ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredProposal {
    pub start: f32,
    pub end: f32,
    pub score: f32,
}

/// Fused confidence `p_s * p_e * p_c`.
pub fn fuse_scores(p: &CandidateProposal) -> ScoredProposal {
    ScoredProposal {
        start: p.t_s as f32,
        end: p.t_e as f32,
        score: p.p_s * p.p_e * p.p_c,
    }
}

/// Temporal intersection over union of two intervals.
pub fn tiou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1.max(b.1) - a.0.min(b.0)).max(f64::MIN_POSITIVE);
    inter / union
}

/// Gaussian Soft-NMS: repeatedly keep the best remaining proposal and decay
/// every other score by `exp(-tIoU^2 / sigma)`; proposals falling below
/// `score_floor` are dropped, and at most `top_k` are kept. The input is not
/// modified; the output is sorted by decayed score, descending, ties broken
/// by (start, end).
pub fn soft_nms(
    proposals: &[ScoredProposal],
    sigma: f64,
    score_floor: f64,
    top_k: usize,
) -> Vec<ScoredProposal> {
    assert!(sigma > 0.0, "sigma must be positive");
    let mut pool: Vec<ScoredProposal> = proposals
        .iter()
        .copied()
        .filter(|p| (p.score as f64) >= score_floor)
        .collect();
    let mut kept: Vec<ScoredProposal> = Vec::new();
    while !pool.is_empty() && kept.len() < top_k {
        let best = pool
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.score
                    .partial_cmp(&b.score)
                    .expect("scores are finite")
                    // on ties prefer the smaller (start, end, index)
                    .then_with(|| {
                        (b.start, b.end, *ib)
                            .partial_cmp(&(a.start, a.end, *ia))
                            .expect("coords are finite")
                    })
            })
            .map(|(i, _)| i)
            .expect("pool is non-empty");
        let pick = pool.swap_remove(best);
        kept.push(pick);
        pool.retain_mut(|p| {
            let overlap = tiou(
                (pick.start as f64, pick.end as f64),
                (p.start as f64, p.end as f64),
            );
            let decayed = p.score as f64 * (-overlap * overlap / sigma).exp();
            p.score = decayed as f32;
            decayed >= score_floor
        });
    }
    kept.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| {
                (a.start, a.end)
                    .partial_cmp(&(b.start, b.end))
                    .expect("coords are finite")
            })
    });
    kept
}

/// tIoU thresholds `[0.5 : 0.05 : 0.95]`.
pub fn thresholds_activitynet() -> Vec<f64> {
    (0..10).map(|k| 0.5 + 0.05 * k as f64).collect()
}

/// tIoU thresholds `[0.5 : 0.05 : 1.0]`.
pub fn thresholds_thumos() -> Vec<f64> {
    (0..11).map(|k| 0.5 + 0.05 * k as f64).collect()
}

/// Per-video proposals (any order) and ground-truth intervals.
pub type PerVideo = BTreeMap<String, (Vec<ScoredProposal>, Vec<(f64, f64)>)>;

/// Average recall at each proposal budget: keep the top-AN proposals per
/// video, count a ground truth as recalled when some kept proposal reaches
/// the tIoU threshold, average recall over videos (videos without ground
/// truths are excluded) and then over thresholds.
pub fn ar_at_an(
    per_video: &PerVideo,
    thresholds: &[f64],
    an_values: &[usize],
) -> BTreeMap<usize, f64> {
    // sort once per video, descending score, deterministic tie-break
    let mut sorted: Vec<Vec<ScoredProposal>> = Vec::new();
    let mut gt_sets: Vec<&Vec<(f64, f64)>> = Vec::new();
    for (props, gts) in per_video.values() {
        if gts.is_empty() {
            continue;
        }
        let mut p = props.clone();
        p.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| {
                    (a.start, a.end)
                        .partial_cmp(&(b.start, b.end))
                        .expect("coords are finite")
                })
        });
        sorted.push(p);
        gt_sets.push(gts);
    }

    let mut out = BTreeMap::new();
    if gt_sets.is_empty() {
        for &an in an_values {
            out.insert(an, 0.0);
        }
        return out;
    }
    let recalls_per_an: Vec<(usize, f64)> = map_indexed(an_values.len(), |ai| {
        let an = an_values[ai];
        let mut sum_over_thresholds = 0.0;
        for &th in thresholds {
            let mut recall_sum = 0.0;
            for (kept_all, gts) in sorted.iter().zip(&gt_sets) {
                let kept = &kept_all[..an.min(kept_all.len())];
                let matched = gts
                    .iter()
                    .filter(|&&g| {
                        kept.iter()
                            .any(|p| tiou((p.start as f64, p.end as f64), g) >= th)
                    })
                    .count();
                recall_sum += matched as f64 / gts.len() as f64;
            }
            sum_over_thresholds += recall_sum / gt_sets.len() as f64;
        }
        (an, sum_over_thresholds / thresholds.len() as f64)
    });
    out.extend(recalls_per_an);
    out
}

/// Trapezoidal area under the AR-AN curve over AN in [1, 100], normalized by
/// 100 and expressed as a percentage. The curve must cover a contiguous
/// integer grid.
pub fn auc(curve: &BTreeMap<usize, f64>) -> Result<f64, EvalError> {
    let (&lo, _) = curve.iter().next().ok_or(EvalError::EmptyCurve)?;
    let (&hi, _) = curve.iter().next_back().expect("non-empty checked");
    for an in lo..=hi {
        if !curve.contains_key(&an) {
            return Err(EvalError::NonContiguousCurve(an));
        }
    }
    let mut area = 0.0;
    for an in lo.max(1)..hi.min(100) {
        let a = curve[&an];
        let b = curve[&(an + 1)];
        area += 0.5 * (a + b);
    }
    Ok(area / 100.0 * 100.0)
}

/// Metrics report emitted by evaluation: AR at the standard budgets, AUC and
/// the full curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub ar_at_10: f64,
    pub ar_at_50: f64,
    pub ar_at_100: f64,
    pub auc: f64,
    /// AR value per AN = 1..=100, in order.
    pub ar_curve: Vec<f64>,
}

impl MetricsReport {
    pub fn from_curve(config_hash: &str, curve: &BTreeMap<usize, f64>) -> Result<Self, EvalError> {
        let auc_v = auc(curve)?;
        let get = |an: usize| curve.get(&an).copied().unwrap_or(0.0);
        Ok(MetricsReport {
            config_hash: config_hash.to_string(),
            ar_at_10: get(10),
            ar_at_50: get(50),
            ar_at_100: get(100),
            auc: auc_v,
            ar_curve: (1..=100).map(get).collect(),
        })
    }
}
