//! Optimization: Adam, the training loop with early stopping, the two-stage
//! pipeline and resumable training checkpoints.

mod adam;
mod config;
mod record;
mod trainer;

#[cfg(test)]
mod tests;

pub use adam::Adam;
pub use config::TrainConfig;
pub use record::{EvalRecord, RunRecord, StopReason};
pub use trainer::{
    fit, load_training_checkpoint, save_training_checkpoint, train_augmentation, train_baseline, train_translation,
    train_two_stage, Baseline, BestPoint, FitOptions, TrainState, TwoStageRun,
};
