//! Optimization loop: Adam with warmup and inverse-square-root decay,
//! per-update curriculum weights, checkpointing and CSV logging.

mod config;
mod log;
mod optim;
mod trainer;

pub use config::{DevMetric, TrainConfig};
pub use log::{steps_to_threshold, LogWriter, TrainLogRecord, LOG_COLUMNS};
pub use optim::{adam_step, global_norm, lr_schedule, AdamHyper, AdamState};
pub use trainer::{evaluate_dev, train, StepReport, TrainOutput, Trainer, DIVERGENCE_PATIENCE};
