// SPDX-License-Identifier: MIT OR Apache-2.0

//! Training-data attribution with randomly projected gradient features,
//! baseline estimators, and linear datamodeling score evaluation.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attribution;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod models;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
