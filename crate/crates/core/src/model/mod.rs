//! Desk-scale masked patch autoencoder with hand-written backpropagation.
//!
//! Blocks are pre-norm (layer norm, multi-head attention, residual, layer
//! norm, GELU MLP, residual) with fixed sinusoidal positions. Only the
//! masked patches contribute to the loss.

mod checkpoint;
mod config;
mod gradcheck;
mod mae;
pub mod ops;
mod params;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use gradcheck::{grad_check, GradCheckReport, GRAD_CHECK_FLOOR};
pub use mae::{Model, Reconstruction, POSITIONS};
pub use params::{Block, LayerNorm, Linear, Params, Tensor};
pub use train::{
    smoothed_losses, train_on, train_steps, write_log_csv, Adam, AdamConfig, TrainConfig, TrainRecord, TrainReport,
};

#[cfg(test)]
mod tests;
