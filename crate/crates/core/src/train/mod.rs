//! Optimizers, the SDRNN training loop, and standalone reifier training.

mod adam;
mod sdrnn;
mod standalone;

pub use adam::{adam_step, AdamState, Method, ADAM_EPS, BETA1, BETA2};
pub use sdrnn::{
    accuracy, model_accuracy, train_sdrnn, write_history_csv, BatchMode, Checkpoint, EpochRecord, LossRouting,
    TrainOutcome, TrainSchedule,
};
pub use standalone::{
    suppression, train_attractor_standalone, train_dae, DaeTrainConfig, StandaloneConfig, StandaloneOutcome,
};
