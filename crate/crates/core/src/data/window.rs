//! Observation windows and linear resampling.

use super::{DataError, FeatureSequence, GroundTruthInstance, ObservationWindow};
use crate::tensor::Tensor;

/// Cut sliding windows of length `l_w` at multiples of `stride`, adding a
/// trailing window aligned to the sequence end when the stride grid does not
/// cover it. Instances are kept only when they fit fully inside a window and
/// are shifted to window-local coordinates. A sequence shorter than `l_w`
/// yields a single zero-padded window with `padded` set.
pub fn slide_windows(
    seq: &FeatureSequence,
    annotations: &[GroundTruthInstance],
    l_w: usize,
    stride: usize,
) -> Result<Vec<ObservationWindow>, DataError> {
    if l_w < 2 {
        return Err(DataError::BadWindowLength { l_w });
    }
    if stride == 0 || stride > l_w {
        return Err(DataError::BadStride { stride, l_w });
    }
    let d = seq.channels();
    let l_s = seq.len();

    if l_s < l_w {
        let mut data = vec![0.0f32; d * l_w];
        for c in 0..d {
            data[c * l_w..c * l_w + l_s]
                .copy_from_slice(&seq.features.data[c * l_s..(c + 1) * l_s]);
        }
        let features = Tensor::from_vec(vec![d, l_w], data).map_err(|source| {
            DataError::Tensor {
                context: "padded window",
                source,
            }
        })?;
        return Ok(vec![ObservationWindow {
            window_start: 0,
            features,
            instances: clip_instances(annotations, 0, l_w),
            padded: true,
        }]);
    }

    let mut starts: Vec<usize> = Vec::new();
    let mut s = 0;
    while s + l_w <= l_s {
        starts.push(s);
        s += stride;
    }
    let last = l_s - l_w;
    if *starts.last().expect("at least the zero start fits") != last {
        starts.push(last);
    }

    let mut out = Vec::with_capacity(starts.len());
    for &start in &starts {
        let mut data = vec![0.0f32; d * l_w];
        for c in 0..d {
            let src = &seq.features.data[c * l_s + start..c * l_s + start + l_w];
            data[c * l_w..(c + 1) * l_w].copy_from_slice(src);
        }
        let features =
            Tensor::from_vec(vec![d, l_w], data).map_err(|source| DataError::Tensor {
                context: "window slice",
                source,
            })?;
        out.push(ObservationWindow {
            window_start: start,
            features,
            instances: clip_instances(annotations, start, l_w),
            padded: false,
        });
    }
    Ok(out)
}

/// Instances fully inside `[start, start + l_w]`, shifted to local coords.
/// Partially covered instances are dropped, not truncated.
fn clip_instances(
    annotations: &[GroundTruthInstance],
    start: usize,
    l_w: usize,
) -> Vec<GroundTruthInstance> {
    let (lo, hi) = (start as f32, (start + l_w) as f32);
    annotations
        .iter()
        .filter(|g| g.start >= lo && g.end <= hi)
        .map(|g| GroundTruthInstance::new(g.start - lo, g.end - lo))
        .collect()
}

/// Resample every channel onto `target_len` uniformly spaced points spanning
/// the original extent.
pub fn rescale_linear(
    seq: &FeatureSequence,
    target_len: usize,
) -> Result<FeatureSequence, DataError> {
    if target_len < 2 {
        return Err(DataError::BadTargetLength { target: target_len });
    }
    let d = seq.channels();
    let l_s = seq.len();
    if target_len == l_s {
        return Ok(seq.clone());
    }
    let scale = (l_s - 1) as f32 / (target_len - 1) as f32;
    let mut data = vec![0.0f32; d * target_len];
    for c in 0..d {
        let src = &seq.features.data[c * l_s..(c + 1) * l_s];
        for t in 0..target_len {
            let p = t as f32 * scale;
            let i0 = (p.floor() as usize).min(l_s - 1);
            let frac = (p - i0 as f32) as f64;
            let lo = src[i0] as f64;
            let hi = if i0 + 1 < l_s { src[i0 + 1] as f64 } else { lo };
            data[c * target_len + t] = (lo + frac * (hi - lo)) as f32;
        }
    }
    Ok(FeatureSequence {
        video_id: seq.video_id.clone(),
        features: Tensor::from_vec(vec![d, target_len], data).map_err(|source| {
            DataError::Tensor {
                context: "rescaled features",
                source,
            }
        })?,
        snippet_interval: seq.snippet_interval,
    })
}

/// Ground-truth coordinates scale by `target_len / l_s` alongside
/// [`rescale_linear`].
pub fn rescale_instance(
    g: GroundTruthInstance,
    orig_len: usize,
    target_len: usize,
) -> GroundTruthInstance {
    let f = target_len as f32 / orig_len as f32;
    GroundTruthInstance::new(g.start * f, g.end * f)
}
