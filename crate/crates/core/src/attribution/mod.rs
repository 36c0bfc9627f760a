// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attribution estimators: TRAK, one-step Newton LOO, influence functions,
//! gradient/representation similarity, and subset-based estimators.

mod baselines;
mod features;
mod influence;
mod newton;
mod scores;
mod subsets;
mod threshold;
mod trak;

pub use baselines::{gas, representation_similarity, tracin};
pub use features::{featurize, featurize_ensemble, output_gradients, FeatureBundle};
pub use influence::{
    influence_from_parts, influence_function, training_hessian, Damping, HessianMode, DEFAULT_RELATIVE_DAMPING,
};
pub use newton::{newton_loo, newton_weights, NewtonWeights, STATIONARITY_TOL};
pub use scores::{AttributionMatrix, Provenance};
pub use subsets::{
    datamodel_fit, datamodel_fit_with, datamodel_matrix, empirical_influence, empirical_influence_matrix, DatamodelFit,
    LassoConfig,
};
pub use threshold::{apply_threshold, cross_validate_threshold, split_runs, ThresholdConfig, ThresholdMode};
pub use trak::{
    soft_threshold, top_k_threshold, trak_ensemble, trak_ensemble_with, trak_single, trak_single_with, Averaging,
    TrakOptions,
};
