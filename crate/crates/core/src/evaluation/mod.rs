// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear datamodeling score, rank statistics, and retraining experiments.

mod counterfactual;
mod lds;
mod runs;
mod stats;

pub use counterfactual::{
    brittleness, brittleness_with_order, counterfactual_removal, random_order, removal_order, BrittlenessResult,
    BudgetOutcome, CounterfactualReport,
};
pub use lds::{attribution_prediction, lds, lds_with, LdsOptions, LdsReport, MIN_RUNS};
pub use runs::{produce_runs, Retrainer, SubsetRun};
pub use stats::{average_ranks, bootstrap_mean_ci, pearson, quantile_sorted, sign_test_p, spearman, Spearman};
