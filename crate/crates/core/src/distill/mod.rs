//! Training objectives and multi-teacher aggregation.

mod aggregate;
mod logit_store;
mod losses;
mod weights;

pub use aggregate::{aggregate_logits, LogitRecord};
pub use logit_store::{LogitStore, LogitStoreReader, LOGIT_STORE_MAGIC, LOGIT_STORE_VERSION};
pub use losses::{
    kd_logit_grads, kd_loss, kd_loss_batch, nll_logit_grads, nll_loss, nll_loss_batch, total_loss,
    LossBreakdown, Objective, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_TAU,
};
pub use weights::{
    fixed_weights, impurity_teacher_weights, impurity_weights, ImpuritySign, SelectiveStrategy,
    TeacherWeights,
};
