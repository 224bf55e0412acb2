//! The learner: a clamped softmax classifier or a quadratic tracking
//! objective, with exact losses and gradients and the SGD model update.

mod model;
mod target;

pub use model::{
    accuracy, full_gradient, grad, loss, loss_and_grad, param_dim, pool_loss, sgd_update,
    smoothness_constant, LearnerConfig, LossSpec, ModelParams, SgdOutcome,
};
pub use target::TargetPath;
