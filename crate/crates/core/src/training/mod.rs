//! Label assignment, weighted logistic losses, the optimizer and the
//! training loop.

mod checkpoint;
mod labels;
mod loss;
mod optim;
mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use labels::{assign_labels, LabelSet};
pub use loss::{total_loss, weighted_bl_loss};
pub use optim::AdamW;
pub use run::{train, EpochRecord, TrainConfig, TrainOutcome};

use crate::model::ModelError;
use crate::tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss is not finite; first non-finite tensor: {tensor}")]
    NonFiniteLoss { tensor: String },
    #[error("probability {value} at index {index} outside (0, 1)")]
    ProbabilityOutOfRange { index: usize, value: f32 },
    #[error("probabilities ({probs}) and labels ({labels}) differ in length")]
    LengthMismatch { probs: usize, labels: usize },
    #[error("empty loss set")]
    EmptySet,
    #[error("checkpoint i/o on {path}: {source}")]
    CheckpointIo {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt checkpoint {path}: {reason}")]
    CorruptCheckpoint { path: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
