//! Optimizer, training configuration and the teacher, logit-dump and
//! student-distillation procedures.

mod config;
mod manifest;
mod optimizer;
mod procedures;

pub use config::TrainConfig;
pub use manifest::{EpochLoss, RunManifest, SKIP_SPAN_OUT_OF_WINDOW};
pub use optimizer::{adamw_update, optimizer_step, AdamWConfig, OptimizerState};
pub use procedures::{
    dataset_loss, distill_student, distill_student_with, distillation_targets, dump_teacher_logits,
    train_teacher, train_teacher_with, DumpOutcome, TrainOutcome,
};
