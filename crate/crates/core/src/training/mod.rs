// SPDX-License-Identifier: MIT OR Apache-2.0

mod mask;
mod trainer;

pub use mask::{sample_subsets, subset_size, SubsetMask};
pub use trainer::{
    build_ensemble, newton_raphson_step, newton_residual, train, CheckpointRecord, LrSchedule, Optimizer, TrainConfig,
    NEWTON_DIVERGENCE_NORM,
};
