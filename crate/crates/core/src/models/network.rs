// SPDX-License-Identifier: MIT OR Apache-2.0

//! Forward and reverse passes for the toy models.
//!
//! The attributed output is the correct-class logit
//! `f = log(p / (1 − p))`. For two classes it is the signed margin
//! `s·(l₁ − l₀ + b)` with `s = +1` for label 1 and `−1` for label 0; for more
//! classes it is `l_y − logsumexp_{j≠y} l_j`. The loss is the cross-entropy
//! `−log p = log(1 + e^{−f})`, so `∂L/∂θ = −(1 − p)·∂f/∂θ`.

use rayon::prelude::*;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::models::{Activation, Dataset, Example, ModelKind, ModelParams, ModelSpec};

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-12;

/// `logit(1 − PROB_EPS)`; `output_fn` is clamped to `±OUTPUT_CLAMP`.
pub fn output_clamp() -> f64 {
    ((1.0 - PROB_EPS) / PROB_EPS).ln()
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn label_sign(y: usize) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

struct Forward {
    /// Input to each weight layer (first is `x`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn check_example(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<()> {
    check_len("model parameters", spec.param_count(), params.theta.len())?;
    check_len("example features", spec.feature_dim, ex.x.len())?;
    if ex.y >= spec.class_count {
        return Err(Error::invalid(format!(
            "label {} out of range for {} classes",
            ex.y, spec.class_count
        )));
    }
    Ok(())
}

fn activate(act: Activation, v: f64) -> f64 {
    match act {
        Activation::Relu => v.max(0.0),
        Activation::Tanh => v.tanh(),
    }
}

fn activate_grad(act: Activation, pre: f64) -> f64 {
    match act {
        Activation::Relu => {
            if pre > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => {
            let t = pre.tanh();
            1.0 - t * t
        }
    }
}

fn forward(spec: &ModelSpec, theta: &[f64], x: &[f64]) -> Forward {
    match spec.kind {
        ModelKind::Logreg if spec.class_count == 2 => Forward {
            inputs: vec![x.to_vec()],
            pre: Vec::new(),
            logits: vec![dot(theta, x)],
        },
        ModelKind::Logreg => {
            let d = spec.feature_dim;
            let logits = (0..spec.class_count)
                .map(|j| dot(&theta[j * d..(j + 1) * d], x))
                .collect();
            Forward {
                inputs: vec![x.to_vec()],
                pre: Vec::new(),
                logits,
            }
        }
        ModelKind::Mlp => {
            let layers = spec.layer_offsets();
            let last = layers.len() - 1;
            let mut inputs = Vec::with_capacity(layers.len());
            let mut pre = Vec::with_capacity(last);
            let mut a = x.to_vec();
            let mut logits = Vec::new();
            for (l, &(w, b, ni, no)) in layers.iter().enumerate() {
                let z: Vec<f64> = (0..no)
                    .map(|o| theta[b + o] + dot(&theta[w + o * ni..w + (o + 1) * ni], &a))
                    .collect();
                inputs.push(std::mem::take(&mut a));
                if l == last {
                    logits = z;
                } else {
                    a = z.iter().map(|&v| activate(spec.activation, v)).collect();
                    pre.push(z);
                }
            }
            Forward { inputs, pre, logits }
        }
    }
}

/// Unclamped correct-class logit and its gradient w.r.t. the logits.
fn output_and_dlogits(spec: &ModelSpec, logits: &[f64], ex: &Example) -> (f64, Vec<f64>) {
    let s = label_sign(ex.y);
    if spec.is_binary_logreg() {
        return (s * (logits[0] + ex.bias), vec![s]);
    }
    if spec.class_count == 2 {
        let m = logits[1] - logits[0] + ex.bias;
        return (s * m, vec![-s, s]);
    }
    let y = ex.y;
    let max_other = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != y)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(j, &l)| if j == y { 0.0 } else { (l - max_other).exp() })
        .collect();
    let z: f64 = weights.iter().sum();
    let lse_other = max_other + z.ln();
    for (j, w) in weights.iter_mut().enumerate() {
        *w = if j == y { 1.0 } else { -*w / z };
    }
    (logits[y] - lse_other, weights)
}

fn backward(spec: &ModelSpec, theta: &[f64], fwd: &Forward, dlogits: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; spec.param_count()];
    match spec.kind {
        ModelKind::Logreg => {
            let d = spec.feature_dim;
            let x = &fwd.inputs[0];
            for (j, &g) in dlogits.iter().enumerate() {
                for (dst, &xv) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *dst = g * xv;
                }
            }
        }
        ModelKind::Mlp => {
            let layers = spec.layer_offsets();
            let mut delta = dlogits.to_vec();
            for l in (0..layers.len()).rev() {
                let (w, b, ni, no) = layers[l];
                let input = &fwd.inputs[l];
                for o in 0..no {
                    let d = delta[o];
                    grad[b + o] = d;
                    if d != 0.0 {
                        for (dst, &iv) in grad[w + o * ni..w + (o + 1) * ni].iter_mut().zip(input) {
                            *dst = d * iv;
                        }
                    }
                }
                if l > 0 {
                    let pre = &fwd.pre[l - 1];
                    let mut prev = vec![0.0; ni];
                    for o in 0..no {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        for (pv, &wv) in prev.iter_mut().zip(&theta[w + o * ni..w + (o + 1) * ni]) {
                            *pv += d * wv;
                        }
                    }
                    for (pv, &z) in prev.iter_mut().zip(pre) {
                        *pv *= activate_grad(spec.activation, z);
                    }
                    delta = prev;
                }
            }
        }
    }
    grad
}

/// Raw class logits. For binary logreg these are `[0, θ·x]`.
pub fn logits(spec: &ModelSpec, params: &ModelParams, x: &[f64]) -> Vec<f64> {
    let l = forward(spec, &params.theta, x).logits;
    if spec.is_binary_logreg() {
        vec![0.0, l[0]]
    } else {
        l
    }
}

/// Predicted class; the per-example bias shifts the binary margin.
pub fn predict(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> usize {
    let mut l = logits(spec, params, &ex.x);
    if spec.class_count == 2 {
        l[1] += ex.bias;
    }
    l.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            },
        )
        .0
}

/// Unclamped correct-class logit.
pub fn raw_output(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<f64> {
    check_example(spec, params, ex)?;
    let fwd = forward(spec, &params.theta, &ex.x);
    let (f, _) = output_and_dlogits(spec, &fwd.logits, ex);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFinite("model output"))
    }
}

/// Cross-entropy loss `log(1 + e^{−f})`, always `≥ 0`.
pub fn loss(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<f64> {
    let l = softplus(-raw_output(spec, params, ex)?);
    if l.is_finite() {
        Ok(l)
    } else {
        Err(Error::NonFinite("loss"))
    }
}

/// Model output function `log(p/(1−p))` with `p` clamped to `[ε, 1−ε]`.
pub fn output_fn(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<f64> {
    let c = output_clamp();
    Ok(raw_output(spec, params, ex)?.clamp(-c, c))
}

/// Correct-class probability, clamped to `[ε, 1−ε]`.
pub fn correct_prob(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<f64> {
    Ok(sigmoid(raw_output(spec, params, ex)?).clamp(PROB_EPS, 1.0 - PROB_EPS))
}

/// `∇_θ output_fn`; zero where the clamp is active.
pub fn grad_output(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<Vec<f64>> {
    check_example(spec, params, ex)?;
    let fwd = forward(spec, &params.theta, &ex.x);
    let (f, dl) = output_and_dlogits(spec, &fwd.logits, ex);
    if !f.is_finite() {
        return Err(Error::NonFinite("model output"));
    }
    if f.abs() > output_clamp() {
        return Ok(vec![0.0; spec.param_count()]);
    }
    let g = backward(spec, &params.theta, &fwd, &dl);
    check_finite("output gradient", &g)?;
    Ok(g)
}

/// `∇_θ loss`.
pub fn grad_loss(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<Vec<f64>> {
    check_example(spec, params, ex)?;
    let fwd = forward(spec, &params.theta, &ex.x);
    let (f, mut dl) = output_and_dlogits(spec, &fwd.logits, ex);
    if !f.is_finite() {
        return Err(Error::NonFinite("model output"));
    }
    let scale = -sigmoid(-f);
    dl.iter_mut().for_each(|v| *v *= scale);
    let g = backward(spec, &params.theta, &fwd, &dl);
    check_finite("loss gradient", &g)?;
    Ok(g)
}

/// Penultimate representation: last hidden activation (mlp) or `x` (logreg).
pub fn representation(spec: &ModelSpec, params: &ModelParams, x: &[f64]) -> Vec<f64> {
    match spec.kind {
        ModelKind::Logreg => x.to_vec(),
        ModelKind::Mlp => {
            let fwd = forward(spec, &params.theta, x);
            fwd.inputs.last().cloned().unwrap_or_default()
        }
    }
}

fn stack(rows: Vec<Vec<f64>>, cols: usize) -> Result<DenseMatrix> {
    let n = rows.len();
    DenseMatrix::from_vec(n, cols, rows.concat())
}

/// Rows `∇_θ f(z_i)` for every example, computed in parallel.
pub fn grad_output_batch(spec: &ModelSpec, params: &ModelParams, data: &Dataset) -> Result<DenseMatrix> {
    let rows = data
        .examples()
        .par_iter()
        .map(|ex| grad_output(spec, params, ex))
        .collect::<Result<Vec<_>>>()?;
    stack(rows, spec.param_count())
}

/// Rows `∇_θ L(z_i)` for every example, computed in parallel.
pub fn grad_loss_batch(spec: &ModelSpec, params: &ModelParams, data: &Dataset) -> Result<DenseMatrix> {
    let rows = data
        .examples()
        .par_iter()
        .map(|ex| grad_loss(spec, params, ex))
        .collect::<Result<Vec<_>>>()?;
    stack(rows, spec.param_count())
}

pub fn outputs(spec: &ModelSpec, params: &ModelParams, data: &Dataset) -> Result<Vec<f64>> {
    data.iter().map(|ex| output_fn(spec, params, ex)).collect()
}

/// Mean loss over the examples.
pub fn mean_loss(spec: &ModelSpec, params: &ModelParams, data: &Dataset) -> Result<f64> {
    let total: f64 = data.iter().map(|ex| loss(spec, params, ex)).sum::<Result<f64>>()?;
    Ok(total / data.len().max(1) as f64)
}

pub fn accuracy(spec: &ModelSpec, params: &ModelParams, data: &Dataset) -> f64 {
    let hits = data.iter().filter(|ex| predict(spec, params, ex) == ex.y).count();
    hits as f64 / data.len().max(1) as f64
}
