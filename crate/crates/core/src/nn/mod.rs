//! A small define-by-hand network stack in `f64`.

mod container;
mod gradcheck;
mod layers;
mod loss;
mod optim;
mod tensor;

pub use container::NamedArrays;
pub use gradcheck::{check_gradients, relative_error, Differentiable, GradCheckConfig, GradCheckReport, LayerProbe};
pub use layers::{
    parameter_count, params_of, uniform, zero_grads, Conv2d, Dense, Flatten, Layer, MeanOverTime, Param,
    PdcLayer, Recurrent, Relu, Sequential, Tanh,
};
pub use loss::{argmax, log_softmax, soft_cross_entropy, softmax};
pub use optim::{clip_grad_norm, grad_norm, warmup_cosine_lr, AdamW, AdamWConfig};
pub use tensor::Tensor;
