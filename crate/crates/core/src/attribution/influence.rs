// SPDX-License-Identifier: MIT OR Apache-2.0

//! Classical influence functions with a dense Hessian.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::{AttributionMatrix, Provenance};
use crate::error::{check_len, Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::models::{self, Dataset, ModelParams, ModelSpec, MAX_MLP_PARAMS};

/// Relative damping used when none is given: `δ = 10⁻³ · trace(H)/p`.
pub const DEFAULT_RELATIVE_DAMPING: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Second derivative of the mean training loss (closed form for binary
    /// logreg, central differences of `grad_loss` otherwise).
    ExactHessian,
    /// Generalized Gauss-Newton `Jᵀ diag(p(1−p)) J / n` on output gradients.
    Ggn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Damping {
    /// `δ = c · trace(H)/p`.
    Relative(f64),
    Absolute(f64),
}

impl Default for Damping {
    fn default() -> Self {
        Damping::Relative(DEFAULT_RELATIVE_DAMPING)
    }
}

impl Damping {
    fn resolve(&self, h: &DenseMatrix) -> Result<f64> {
        let d = match *self {
            Damping::Relative(c) => c * h.trace() / h.rows().max(1) as f64,
            Damping::Absolute(d) => d,
        };
        if d.is_finite() && d >= 0.0 {
            Ok(d)
        } else {
            Err(Error::invalid(format!(
                "damping must be finite and non-negative, got {d}"
            )))
        }
    }
}

/// Undamped `p × p` Hessian of the mean training loss.
pub fn training_hessian(
    spec: &ModelSpec,
    params: &ModelParams,
    train: &Dataset,
    mode: HessianMode,
) -> Result<DenseMatrix> {
    spec.check_dataset(train)?;
    params.check(spec)?;
    let p = spec.param_count();
    if p > MAX_MLP_PARAMS {
        return Err(Error::invalid(format!(
            "dense Hessian needs p ≤ {MAX_MLP_PARAMS}, got {p}"
        )));
    }
    if train.is_empty() {
        return Err(Error::invalid("influence functions need training data"));
    }
    let n = train.len() as f64;
    match mode {
        HessianMode::ExactHessian if spec.is_binary_logreg() => {
            let r: Vec<f64> = train
                .iter()
                .map(|ex| {
                    let f = models::raw_output(spec, params, ex)?;
                    Ok(models::sigmoid(f) * models::sigmoid(-f))
                })
                .collect::<Result<_>>()?;
            Ok(train.design_matrix().weighted_gram(Some(&r))?.scaled(1.0 / n))
        }
        HessianMode::ExactHessian => finite_difference_hessian(spec, params, train),
        HessianMode::Ggn => {
            let j = models::grad_output_batch(spec, params, train)?;
            let r: Vec<f64> = train
                .iter()
                .map(|ex| {
                    let f = models::raw_output(spec, params, ex)?;
                    Ok(models::sigmoid(f) * models::sigmoid(-f))
                })
                .collect::<Result<_>>()?;
            Ok(j.weighted_gram(Some(&r))?.scaled(1.0 / n))
        }
    }
}

fn mean_grad(spec: &ModelSpec, theta: Vec<f64>, train: &Dataset) -> Result<Vec<f64>> {
    let params = ModelParams { theta };
    let g = models::grad_loss_batch(spec, &params, train)?;
    let n = train.len() as f64;
    let mut out = vec![0.0; spec.param_count()];
    for row in g.row_iter() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

fn finite_difference_hessian(spec: &ModelSpec, params: &ModelParams, train: &Dataset) -> Result<DenseMatrix> {
    let p = spec.param_count();
    let cols = (0..p)
        .into_par_iter()
        .map(|j| {
            let h = FD_STEP * params.theta[j].abs().max(1.0);
            let mut plus = params.theta.clone();
            plus[j] += h;
            let mut minus = params.theta.clone();
            minus[j] -= h;
            let gp = mean_grad(spec, plus, train)?;
            let gm = mean_grad(spec, minus, train)?;
            Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    // Symmetrize to remove the O(h²) asymmetry of the difference quotient.
    Ok(DenseMatrix::from_fn(p, p, |i, j| 0.5 * (cols[j][i] + cols[i][j])))
}

/// `τ_ti = −(1/n) · gᵀ_t (H + δI)⁻¹ ℓ_i` where `g_t` are test output
/// gradients (rows), `ℓ_i` are training loss gradients (rows), and `H` is the
/// undamped Hessian of the mean loss over `n` examples. The sign makes
/// positive scores mean "removing `z_i` lowers the output", like the other
/// estimators.
pub fn influence_from_parts(
    test_grads: &DenseMatrix,
    train_loss_grads: &DenseMatrix,
    hessian: &DenseMatrix,
    damping: f64,
    n: usize,
) -> Result<DenseMatrix> {
    let p = hessian.rows();
    check_len("Hessian columns", p, hessian.cols())?;
    check_len("test gradient width", p, test_grads.cols())?;
    check_len("train gradient width", p, train_loss_grads.cols())?;
    if n == 0 {
        return Err(Error::invalid("influence needs n ≥ 1"));
    }
    let mut h = hessian.clone();
    for j in 0..p {
        h.set(j, j, h.get(j, j) + damping);
    }
    h.require_finite("Hessian")?;
    let chol = Cholesky::factor(&h).ok_or(Error::IndefiniteHessian { damping })?;
    let a = chol.solve_rows(test_grads)?;
    Ok(a.matmul_transb(train_loss_grads)?.scaled(-1.0 / n as f64))
}

/// Influence-function scores for every (test, train) pair.
pub fn influence_function(
    spec: &ModelSpec,
    params: &ModelParams,
    train: &Dataset,
    test: &Dataset,
    mode: HessianMode,
    damping: Damping,
) -> Result<AttributionMatrix> {
    spec.check_dataset(test)?;
    let h = training_hessian(spec, params, train, mode)?;
    let delta = damping.resolve(&h)?;
    let g_test = models::grad_output_batch(spec, params, test)?;
    let g_train = models::grad_loss_batch(spec, params, train)?;
    let scores = influence_from_parts(&g_test, &g_train, &h, delta, train.len())?;
    let tag = match mode {
        HessianMode::ExactHessian => "if-exact",
        HessianMode::Ggn => "if-ggn",
    };
    AttributionMatrix::new(
        scores,
        tag,
        Provenance {
            checkpoint_ids: Vec::new(),
            spec_hash: spec.content_hash(),
            dataset_hash: train.content_hash(),
        },
    )
}
