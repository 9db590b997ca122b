//! Minimal neural-network kernel for the grasp regressor: dense layers, a
//! shared per-point encoder, max-pool aggregation, batch norm, dropout,
//! squared-error loss and Adam, all in `f64` with exact backpropagation.
//!
//! Tensors are `ndarray` arrays: point batches are `B × N × 3`, everything
//! downstream of the encoder input is a `rows × channels` matrix.

mod adam;
mod checkpoint;
pub mod layers;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use model::{
    batch_from_clouds, stack_targets, Block, ForwardCache, ForwardMode, Gradients,
    RegressorConfig, RegressorModel, OUTPUT_WIDTH,
};
pub use train::{
    evaluate_loss, train, EpochLoss, PreparedSample, TrainConfig, TrainHistory, Trainer,
};
