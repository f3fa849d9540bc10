//! Dense arithmetic and differentiable layer primitives.

pub mod gradcheck;
pub mod layers;
mod matrix;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, NamedTensor};
pub use layers::{
    batch_norm_backward, batch_norm_train, leaky_relu, leaky_relu_backward, linear_backward,
    linear_forward, sigmoid, BatchNormCache, BatchNormState, Linear, Mode, Parameter, LEAKY_SLOPE,
};
pub use matrix::{dot, norm, Matrix};
