// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-step Newton leave-one-out estimates for binary logistic regression.

use serde::{Deserialize, Serialize};

use super::scores::{AttributionMatrix, Provenance};
use crate::error::{check_len, Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::models::{sigmoid, Dataset, ModelParams, ModelSpec};
use crate::training::{newton_residual, SubsetMask};

/// Largest `‖Xᵀq − λθ‖∞ / n` accepted as a converged fit.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// `R_ii = p_i(1−p_i)` and leverages `h_i = x_iᵀ(XᵀRX)⁻¹x_i · R_ii`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonWeights {
    pub r: Vec<f64>,
    pub leverage: Vec<f64>,
}

fn sign(y: usize) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

struct Fit {
    chol: Cholesky,
    weights: NewtonWeights,
    q: Vec<f64>,
}

fn fit(train: &Dataset, params: &ModelParams, ridge: f64) -> Result<Fit> {
    if train.class_count() != 2 {
        return Err(Error::invalid("Newton LOO needs a binary logistic regression"));
    }
    check_len("Newton LOO parameters", train.feature_dim(), params.theta.len())?;
    params.check(&ModelSpec::logreg(train.feature_dim(), 2))?;
    let n = train.len();
    let residual = newton_residual(train, &SubsetMask::full(n), params, ridge)?;
    let worst = residual.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if worst > STATIONARITY_TOL * n as f64 {
        return Err(Error::NotConverged(format!(
            "model is not stationary: max |gradient| = {worst:e}"
        )));
    }

    let mut r = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for ex in train.iter() {
        let f = sign(ex.y) * (crate::linalg::dot(&params.theta, &ex.x) + ex.bias);
        r.push(sigmoid(f) * sigmoid(-f));
        q.push(sigmoid(-f));
    }
    let x = train.design_matrix();
    let mut h = x.weighted_gram(Some(&r))?;
    for j in 0..h.rows() {
        h.set(j, j, h.get(j, j) + ridge);
    }
    let chol = Cholesky::factor_with_jitter(&h)?;
    let leverage: Vec<f64> = (0..n).map(|i| chol.quad_form(x.row(i)) * r[i]).collect();
    if let Some(i) = leverage.iter().position(|h| *h >= 1.0) {
        return Err(Error::invalid(format!("leverage h[{i}] = {} ≥ 1", leverage[i])));
    }
    Ok(Fit {
        chol,
        weights: NewtonWeights { r, leverage },
        q,
    })
}

/// The weights at a converged fit.
pub fn newton_weights(train: &Dataset, params: &ModelParams, ridge: f64) -> Result<NewtonWeights> {
    Ok(fit(train, params, ridge)?.weights)
}

/// `τ(z)_i = x̃ᵀ(XᵀRX + λI)⁻¹x̃_i · (1−p_i) / (1−h_i)` with sign-folded
/// inputs `x̃ = ±x` (`+` for label 1). Estimates `f(z; θ*(S)) − f(z; θ*(S∖z_i))`
/// where `θ*` was fit on all of `train` with the same ridge `λ`.
pub fn newton_loo(train: &Dataset, test: &Dataset, params: &ModelParams, ridge: f64) -> Result<AttributionMatrix> {
    check_len("test feature_dim", train.feature_dim(), test.feature_dim())?;
    let Fit { chol, weights, q } = fit(train, params, ridge)?;
    let n = train.len();
    let signed_test = DenseMatrix::from_fn(test.len(), train.feature_dim(), |t, j| {
        let ex = test.get(t);
        sign(ex.y) * ex.x[j]
    });
    let a = chol.solve_rows(&signed_test)?;
    let signed_train = DenseMatrix::from_fn(n, train.feature_dim(), |i, j| {
        let ex = train.get(i);
        sign(ex.y) * ex.x[j]
    });
    let mut t = a.matmul_transb(&signed_train)?;
    let col: Vec<f64> = (0..n).map(|i| q[i] / (1.0 - weights.leverage[i])).collect();
    t.scale_columns(&col)?;
    AttributionMatrix::new(
        t,
        "newton-loo",
        Provenance {
            checkpoint_ids: Vec::new(),
            spec_hash: ModelSpec::logreg(train.feature_dim(), 2).content_hash(),
            dataset_hash: train.content_hash(),
        },
    )
}
