//! Surrogate-gradient BPTT, losses and the two-stage training procedure.

mod bptt;
pub mod gradcheck;
mod loss;
mod optim;
mod surrogate;
mod train;

pub use bptt::{bptt, BpttOptions, GradientSet, LossParts};
pub use loss::{classification_loss, penalty_grad, penalty_loss};
pub use optim::{Optimizer, OptimizerKind, ParamMask};
pub use surrogate::{
    logistic_derivative, rect_surrogate, sigmoid_surrogate, Surrogate, SurrogateConfig, SurrogateKind,
};
pub use train::{evaluate, train_stage1, train_stage2, EpochLog, EvalSummary, TrainConfig, TrainOutcome};
