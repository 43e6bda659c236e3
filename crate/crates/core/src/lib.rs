//! Boundary-content graph network for temporal action proposal generation.
//!
//! The crate turns a per-video snippet feature sequence into scored temporal
//! proposals: a convolutional backbone produces boundary and content features,
//! a bipartite boundary-content graph links candidate start/end locations
//! through content edges, two graph reasoning blocks exchange information
//! between nodes and edges, and an output head scores every (start, end) pair.
//! Training, Soft-NMS post-processing and AR@AN / AUC evaluation are included,
//! along with a synthetic feature generator so the whole pipeline runs without
//! any video encoder.
//!
//! Heavy inner loops (matrix products, convolutions, per-edge sampling,
//! per-video inference) run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain sequential loops without it. Both
//! paths produce bit-identical results.

pub mod config;
pub mod data;
pub mod graph;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod postprocess;
pub mod proposals;
pub mod reasoning;
pub mod tensor;
pub mod training;

pub use config::RunConfig;
pub use model::{Ablation, BcGnn, ModelDims};
pub use tensor::{ParamStore, Tape, Tensor, TensorError, Var};
