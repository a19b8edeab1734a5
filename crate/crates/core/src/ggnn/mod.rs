//! Gated graph neural network over fused graphs: typed linear messages,
//! summed aggregation, GRU state updates, masked branch/prefetch heads and
//! exact reverse-mode gradients.

mod batch;
mod checkpoint;
pub mod gradcheck;
mod model;
mod params;
mod train;

use thiserror::Error;

use crate::encode::EncodeError;
use crate::graph::NodeId;

pub use batch::{GraphInput, Sample, Target, Task, TaskBatch, Topology};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use model::{
    address_from_probs, forward, input_gradient, loss_and_grads, predict_branch, predict_prefetch, propagate, propagate_topology,
    Forward, TaskOutput,
};
pub use params::{GgnnParams, GruParams};
pub use train::{train, train_from, Adam, TaskSet, TrainConfig, TrainLog};

/// Width of the prefetch head: one logit per address bit, MSB first.
pub const ADDRESS_BITS: usize = 64;

#[derive(Debug, Error)]
pub enum GgnnError {
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("propagation needs at least one step")]
    ZeroSteps,
    #[error("node {node} is not a {expected} task node")]
    WrongNodeKind { node: NodeId, expected: &'static str },
    #[error("batch has no task nodes")]
    EmptyBatch,
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
