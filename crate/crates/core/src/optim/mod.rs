//! Initialization, Adam and plain gradient steps, and the training loop.

mod adam;
mod init;
mod train;

pub use adam::{gd_step, AdamState};
pub use init::{init_balanced, init_balanced_from_target, init_gaussian, DEFAULT_INIT_STD};
pub use train::{
    train, InitScheme, OptimizerKind, StepOutcome, TrainConfig, TrainReport, Trainer,
};
