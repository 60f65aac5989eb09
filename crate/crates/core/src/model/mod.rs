//! Dense networks: parameter containers, forward/backward passes, losses,
//! optimizers and parameter-space distances.

mod distance;
mod nn;
mod optim;
mod spec;
mod tensor;

pub use distance::{layer_l2_distance, model_divergence};
pub use nn::{backward_and_loss, forward, LossKind, Targets};
pub use optim::{
    adam_step, adam_update, sgd_step, sgd_update, AdamHyper, AdamState, Optimizer, OptimizerKind,
};
pub use spec::{init_params, Activation, Head, ModelSpec};
pub use tensor::{LayerTensor, Matrix, ModelParams};
