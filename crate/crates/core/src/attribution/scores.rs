// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Where a score matrix came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub checkpoint_ids: Vec<usize>,
    pub spec_hash: String,
    pub dataset_hash: String,
}

/// Test-by-train score matrix; row `t` attributes test example `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub scores: DenseMatrix,
    pub method: String,
    pub provenance: Provenance,
}

impl AttributionMatrix {
    pub fn new(scores: DenseMatrix, method: impl Into<String>, provenance: Provenance) -> Result<Self> {
        scores.require_finite("attribution scores")?;
        Ok(AttributionMatrix {
            scores,
            method: method.into(),
            provenance,
        })
    }

    pub fn n_test(&self) -> usize {
        self.scores.rows()
    }

    pub fn n_train(&self) -> usize {
        self.scores.cols()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.scores.row(t)
    }

    pub fn with_scores(&self, scores: DenseMatrix, method: impl Into<String>) -> Result<Self> {
        if scores.shape() != self.scores.shape() {
            return Err(Error::invalid("replacement scores change the matrix shape"));
        }
        AttributionMatrix::new(scores, method, self.provenance.clone())
    }
}
