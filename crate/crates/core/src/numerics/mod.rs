//! Dense numerical primitives with analytic backward passes.

mod linalg;
mod softmax;
mod tensor;

pub use linalg::{
    gelu, gelu_backward, layer_norm, layer_norm_backward, matmul, matmul_backward, matmul_nt,
    matmul_tn_acc, LayerNormCache, LAYER_NORM_EPS,
};
pub use softmax::{
    cross_entropy, cross_entropy_grad_predicted, entropy, log_softmax_temperature, pairwise_sum,
    softmax_backward, softmax_cross_entropy_grad, softmax_temperature, LOG_CLAMP,
};
pub use tensor::{Distribution, Matrix};
