// SPDX-License-Identifier: MIT OR Apache-2.0

//! Differentiable toy models: logistic regression and small MLPs with
//! hand-written reverse-mode gradients.

mod data;
mod network;
mod spec;
pub mod synthetic;

pub use data::{Dataset, Example};
pub use network::{
    accuracy, correct_prob, grad_loss, grad_loss_batch, grad_output, grad_output_batch, logits, loss, mean_loss,
    output_clamp, output_fn, outputs, predict, raw_output, representation, sigmoid, softplus, PROB_EPS,
};
pub use spec::{Activation, ModelKind, ModelParams, ModelSpec, MAX_MLP_LAYERS, MAX_MLP_PARAMS};
