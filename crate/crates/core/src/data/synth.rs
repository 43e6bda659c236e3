//! Synthetic feature generator.
//!
//! Stands in for a video encoder: every action instance imprints a boxcar on
//! a content channel plus onset/offset bumps on two boundary channels, over a
//! Gaussian background. Per-video seeds are derived from (seed, index), so
//! parallel generation is bit-identical to serial.

use super::{DataError, FeatureSequence, GroundTruthInstance};
use crate::par::map_indexed;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const MIN_DURATION: usize = 3;
const MAX_DURATION: usize = 16;
const NOISE_STD: f32 = 0.3;
const BOXCAR_GAIN: f32 = 1.5;
const BUMP_GAIN: f32 = 2.0;
const BUMP_HALF_WIDTH: f32 = 1.5;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_videos: usize,
    pub l_s: usize,
    pub d_i: usize,
    pub min_instances: usize,
    pub max_instances: usize,
    pub snippet_interval: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            n_videos: 20,
            l_s: 64,
            d_i: 8,
            min_instances: 1,
            max_instances: 2,
            snippet_interval: 4,
        }
    }
}

fn video_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Deterministic synthetic dataset.
pub fn synth_dataset(
    spec: &SynthSpec,
) -> Result<Vec<(FeatureSequence, Vec<GroundTruthInstance>)>, DataError> {
    if spec.n_videos < 1 || spec.d_i < 1 || spec.l_s < 2 || spec.min_instances > spec.max_instances
    {
        return Err(DataError::InfeasiblePacking {
            requested: spec.max_instances,
            len: spec.l_s,
        });
    }
    let k = spec.max_instances;
    // k instances of at least MIN_DURATION with a 1-snippet gap between them
    if k * MIN_DURATION + k.saturating_sub(1) > spec.l_s {
        return Err(DataError::InfeasiblePacking {
            requested: k,
            len: spec.l_s,
        });
    }
    Ok(map_indexed(spec.n_videos, |idx| {
        let mut rng = video_rng(spec.seed, idx);
        synth_video(spec, idx, &mut rng)
    }))
}

fn synth_video(
    spec: &SynthSpec,
    idx: usize,
    rng: &mut ChaCha8Rng,
) -> (FeatureSequence, Vec<GroundTruthInstance>) {
    let (d, l_s) = (spec.d_i, spec.l_s);
    let noise = Normal::new(0.0f32, NOISE_STD).expect("std is positive");
    let mut data: Vec<f32> = (0..d * l_s).map(|_| noise.sample(rng)).collect();

    let k = rng.gen_range(spec.min_instances..=spec.max_instances);
    let instances = place_instances(k, l_s, rng);

    let content_ch = 0;
    let onset_ch = 1 % d;
    let offset_ch = 2 % d;
    for g in &instances {
        let (s, e) = (g.start as usize, g.end as usize);
        for t in s..e {
            data[content_ch * l_s + t] += BOXCAR_GAIN;
        }
        for t in 0..l_s {
            let ds = (t as f32 - g.start).abs();
            if ds < BUMP_HALF_WIDTH {
                data[onset_ch * l_s + t] += BUMP_GAIN * (1.0 - ds / BUMP_HALF_WIDTH);
            }
            let de = (t as f32 - g.end).abs();
            if de < BUMP_HALF_WIDTH {
                data[offset_ch * l_s + t] += BUMP_GAIN * (1.0 - de / BUMP_HALF_WIDTH);
            }
        }
    }

    let seq = FeatureSequence {
        video_id: format!("synth_{idx:04}"),
        features: Tensor::from_vec(vec![d, l_s], data).expect("length matches by construction"),
        snippet_interval: spec.snippet_interval,
    };
    (seq, instances)
}

/// Place `k` disjoint integer-aligned instances with at least one snippet of
/// separation, randomizing durations and gap sizes.
fn place_instances(k: usize, l_s: usize, rng: &mut ChaCha8Rng) -> Vec<GroundTruthInstance> {
    if k == 0 {
        return Vec::new();
    }
    let sep = k - 1;
    // feasibility was checked upfront, so (l_s - sep) / k >= MIN_DURATION
    let d_cap = ((l_s - sep) / k).clamp(MIN_DURATION, MAX_DURATION);
    let durations: Vec<usize> = (0..k)
        .map(|_| rng.gen_range(MIN_DURATION..=d_cap))
        .collect();
    let used: usize = durations.iter().sum::<usize>() + sep;
    let extra = l_s - used;
    // spread the slack over the k+1 gaps (before, between, after)
    let mut gaps = vec![0usize; k + 1];
    for _ in 0..extra {
        gaps[rng.gen_range(0..=k)] += 1;
    }
    let mut out = Vec::with_capacity(k);
    let mut pos = gaps[0];
    for (i, d) in durations.iter().enumerate() {
        out.push(GroundTruthInstance::new(pos as f32, (pos + d) as f32));
        pos += d + 1 + gaps[i + 1];
    }
    out
}
