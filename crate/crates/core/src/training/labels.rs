//! Ground-truth label assignment for boundary and content scores.

use crate::data::GroundTruthInstance;
use crate::postprocess::tiou;

/// Binary targets: one per snippet location for starts and ends, one per
/// edge pair for content.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub b_start: Vec<f32>,
    pub b_end: Vec<f32>,
    pub b_content: Vec<f32>,
}

/// A boundary interval of half-width `duration / 10` around each instance
/// boundary; the start/end regions are unions over instances. A snippet
/// location gets a positive boundary label when it lies inside the region; a
/// pair gets a positive content label when both boundaries are in-region and
/// the pair overlaps some instance with tIoU above 0.5.
pub fn assign_labels(
    instances: &[GroundTruthInstance],
    l_w: usize,
    pairs: &[(usize, usize)],
) -> LabelSet {
    let start_regions: Vec<(f32, f32)> = instances
        .iter()
        .map(|g| {
            let r = g.duration() / 10.0;
            (g.start - r, g.start + r)
        })
        .collect();
    let end_regions: Vec<(f32, f32)> = instances
        .iter()
        .map(|g| {
            let r = g.duration() / 10.0;
            (g.end - r, g.end + r)
        })
        .collect();

    let in_union = |regions: &[(f32, f32)], x: f32| {
        regions.iter().any(|&(lo, hi)| x >= lo && x <= hi)
    };

    let b_start: Vec<f32> = (0..l_w)
        .map(|i| if in_union(&start_regions, i as f32) { 1.0 } else { 0.0 })
        .collect();
    let b_end: Vec<f32> = (0..l_w)
        .map(|j| if in_union(&end_regions, j as f32) { 1.0 } else { 0.0 })
        .collect();

    let b_content: Vec<f32> = pairs
        .iter()
        .map(|&(i, j)| {
            let boundaries_ok = b_start[i] == 1.0 && b_end[j] == 1.0;
            let overlap_ok = instances.iter().any(|g| {
                tiou((i as f64, j as f64), (g.start as f64, g.end as f64)) > 0.5
            });
            if boundaries_ok && overlap_ok {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    LabelSet {
        b_start,
        b_end,
        b_content,
    }
}
