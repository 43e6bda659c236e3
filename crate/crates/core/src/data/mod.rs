//! Data ingestion: feature files, annotations, observation windows,
//! resampling and the synthetic dataset generator.

mod annotations;
mod format;
mod interp;
mod synth;
mod window;

pub use annotations::{read_annotations, write_annotations, AnnotationFile, VideoAnnotation};
pub use format::{load_features, write_features};
pub use interp::{interp_content, interp_positions};
pub use synth::{synth_dataset, SynthSpec};
pub use window::{rescale_instance, rescale_linear, slide_windows};

use crate::tensor::{Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {path}: {source}")]
    MissingFile {
        path: String,
        source: std::io::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt header in {path}: {reason}")]
    CorruptHeader { path: String, reason: String },
    #[error("non-finite value at element {index} of {path}")]
    NonFiniteValue { path: String, index: usize },
    #[error("annotation parse error in {path}: {source}")]
    BadAnnotation {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid instance [{start}, {end}] for sequence of length {len}")]
    BadInstance { start: f32, end: f32, len: usize },
    #[error("cannot pack {requested} instances of minimum duration 3 into {len} snippets")]
    InfeasiblePacking { requested: usize, len: usize },
    #[error("{context}: {source}")]
    Tensor {
        context: &'static str,
        #[source]
        source: TensorError,
    },
    #[error("window length must be >= 2, got {l_w}")]
    BadWindowLength { l_w: usize },
    #[error("stride must satisfy 1 <= stride <= l_w, got stride {stride} with l_w {l_w}")]
    BadStride { stride: usize, l_w: usize },
    #[error("target length must be >= 2, got {target}")]
    BadTargetLength { target: usize },
    #[error("illegal pair ({i}, {j}): start must precede end")]
    IllegalPair { i: usize, j: usize },
}

/// Per-video snippet feature matrix `[D_i x l_s]` plus the frame interval
/// each snippet covers.
#[derive(Debug, Clone)]
pub struct FeatureSequence {
    pub video_id: String,
    pub features: Tensor,
    pub snippet_interval: u32,
}

impl FeatureSequence {
    pub fn channels(&self) -> usize {
        self.features.shape[0]
    }

    pub fn len(&self) -> usize {
        self.features.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One ground-truth action instance in snippet coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthInstance {
    pub start: f32,
    pub end: f32,
}

impl GroundTruthInstance {
    pub fn new(start: f32, end: f32) -> Self {
        GroundTruthInstance { start, end }
    }

    pub fn duration(&self) -> f32 {
        self.end - self.start
    }
}

/// A fixed-length slice of a feature sequence with window-local annotations.
#[derive(Debug, Clone)]
pub struct ObservationWindow {
    pub window_start: usize,
    pub features: Tensor,
    pub instances: Vec<GroundTruthInstance>,
    /// Set when the source sequence was shorter than the window and the tail
    /// was zero-padded.
    pub padded: bool,
}
