// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mask::{sample_subsets, SubsetMask};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, psd_solve, DenseMatrix};
use crate::models::{self, sigmoid, Dataset, ModelParams, ModelSpec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear decay from the base rate to `final_fraction` of it at the last epoch.
    Linear {
        final_fraction: f64,
    },
}

/// Optimizer settings. For Newton, `epochs` caps the iteration count and
/// `tol` bounds the final step's max-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub momentum: f64,
    pub l2_ridge: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs at which to emit checkpoints; empty means the final epoch only.
    #[serde(default)]
    pub checkpoint_epochs: Vec<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-12
}

/// Parameter max-norm treated as divergence on the Newton path.
pub const NEWTON_DIVERGENCE_NORM: f64 = 1e8;

impl TrainConfig {
    pub fn sgd(epochs: usize, lr: f64, batch_size: usize, seed: u64) -> Self {
        TrainConfig {
            optimizer: Optimizer::Sgd,
            epochs,
            lr,
            schedule: LrSchedule::Constant,
            momentum: 0.9,
            l2_ridge: 0.0,
            batch_size,
            seed,
            checkpoint_epochs: Vec::new(),
            tol: default_tol(),
        }
    }

    /// Newton-Raphson with the default `10⁻⁶` ridge and up to 100 iterations.
    pub fn newton() -> Self {
        TrainConfig {
            optimizer: Optimizer::Newton,
            epochs: 100,
            lr: 1.0,
            schedule: LrSchedule::Constant,
            momentum: 0.0,
            l2_ridge: 1e-6,
            batch_size: 0,
            seed: 0,
            checkpoint_epochs: Vec::new(),
            tol: default_tol(),
        }
    }

    pub fn with_ridge(mut self, l2: f64) -> Self {
        self.l2_ridge = l2;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_checkpoints(mut self, epochs: Vec<usize>) -> Self {
        self.checkpoint_epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if !(self.l2_ridge >= 0.0) {
            return Err(Error::invalid("l2_ridge must be non-negative"));
        }
        if self.optimizer == Optimizer::Sgd {
            if self.batch_size == 0 {
                return Err(Error::invalid("batch_size must be positive"));
            }
            if !(self.lr > 0.0) {
                return Err(Error::invalid("lr must be positive"));
            }
            if !(0.0..1.0).contains(&self.momentum) {
                return Err(Error::invalid("momentum must be in [0, 1)"));
            }
        }
        if let Some(&e) = self.checkpoint_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::invalid(format!(
                "checkpoint epoch {e} outside 1..={}",
                self.epochs
            )));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Linear { final_fraction } => {
                let t = if self.epochs > 1 {
                    (epoch - 1) as f64 / (self.epochs - 1) as f64
                } else {
                    1.0
                };
                self.lr * (1.0 + t * (final_fraction - 1.0))
            }
        }
    }
}

/// Parameters after some epoch of one training run on one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub params: ModelParams,
    pub mask: SubsetMask,
    pub seed: u64,
    pub epoch: usize,
    /// Position in the ensemble; strictly increasing across records.
    pub model_index: usize,
    /// Training run this checkpoint came from (several checkpoints may share one).
    #[serde(default)]
    pub run_index: usize,
}

/// Trains on the masked-in examples and returns the configured checkpoints.
pub fn train(
    spec: &ModelSpec,
    dataset: &Dataset,
    mask: &SubsetMask,
    config: &TrainConfig,
) -> Result<Vec<CheckpointRecord>> {
    spec.validate()?;
    spec.check_dataset(dataset)?;
    config.validate()?;
    check_len("training mask", dataset.len(), mask.len())?;
    if mask.count() == 0 {
        return Err(Error::invalid("training mask is empty"));
    }
    match config.optimizer {
        Optimizer::Newton => train_newton(spec, dataset, mask, config),
        Optimizer::Sgd => train_sgd(spec, dataset, mask, config),
    }
}

fn record(params: ModelParams, mask: &SubsetMask, config: &TrainConfig, epoch: usize) -> CheckpointRecord {
    CheckpointRecord {
        params,
        mask: mask.clone(),
        seed: config.seed,
        epoch,
        model_index: 0,
        run_index: 0,
    }
}

fn newton_system(dataset: &Dataset, mask: &SubsetMask, theta: &[f64], ridge: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    let d = theta.len();
    let mut rows = Vec::with_capacity(mask.count() * d);
    let mut weights = Vec::with_capacity(mask.count());
    let mut neg_grad = vec![0.0; d];
    for i in mask.indices() {
        let ex = dataset.get(i);
        let s = if ex.y == 1 { 1.0 } else { -1.0 };
        let f = s * (dot(theta, &ex.x) + ex.bias);
        let p = sigmoid(f);
        let q = sigmoid(-f);
        for (g, xv) in neg_grad.iter_mut().zip(&ex.x) {
            *g += q * s * xv;
        }
        rows.extend_from_slice(&ex.x);
        weights.push(p * q);
    }
    for (g, t) in neg_grad.iter_mut().zip(theta) {
        *g -= ridge * t;
    }
    let x = DenseMatrix::from_vec(weights.len(), d, rows)?;
    let mut h = x.weighted_gram(Some(&weights))?;
    for j in 0..d {
        h.set(j, j, h.get(j, j) + ridge);
    }
    Ok((h, neg_grad))
}

/// `−∇` of the masked, ridge-penalized total logistic loss at `params`
/// (i.e. `Xᵀq − λθ` with signed inputs).
pub fn newton_residual(dataset: &Dataset, mask: &SubsetMask, params: &ModelParams, ridge: f64) -> Result<Vec<f64>> {
    Ok(newton_system(dataset, mask, &params.theta, ridge)?.1)
}

/// One Newton-Raphson update `θ + (XᵀRX + λI)⁻¹(Xᵀq̂ − λθ)` for binary
/// logistic regression on the masked-in examples.
pub fn newton_raphson_step(
    dataset: &Dataset,
    mask: &SubsetMask,
    params: &ModelParams,
    ridge: f64,
) -> Result<ModelParams> {
    if dataset.class_count() != 2 {
        return Err(Error::invalid("Newton-Raphson requires binary logistic regression"));
    }
    check_len("newton parameters", dataset.feature_dim(), params.theta.len())?;
    check_len("training mask", dataset.len(), mask.len())?;
    let (h, g) = newton_system(dataset, mask, &params.theta, ridge)?;
    let rhs = DenseMatrix::from_vec(g.len(), 1, g)?;
    let step = psd_solve(&h, &rhs)?;
    let theta: Vec<f64> = params.theta.iter().zip(step.as_slice()).map(|(t, s)| t + s).collect();
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("Newton step"));
    }
    Ok(ModelParams { theta })
}

fn train_newton(
    spec: &ModelSpec,
    dataset: &Dataset,
    mask: &SubsetMask,
    config: &TrainConfig,
) -> Result<Vec<CheckpointRecord>> {
    if !spec.is_binary_logreg() {
        return Err(Error::invalid("the Newton optimizer supports binary logreg only"));
    }
    let mut params = ModelParams::zeros(spec);
    let mut out = Vec::new();
    for it in 1..=config.epochs {
        let next = match newton_raphson_step(dataset, mask, &params, config.l2_ridge) {
            Ok(p) => p,
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch: it }),
            Err(e) => return Err(e),
        };
        let step = next
            .theta
            .iter()
            .zip(&params.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        params = next;
        if params.theta.iter().any(|t| t.abs() > NEWTON_DIVERGENCE_NORM) {
            return Err(Error::Diverged { epoch: it });
        }
        if config.checkpoint_epochs.contains(&it) {
            out.push(record(params.clone(), mask, config, it));
        }
        if step <= config.tol * (1.0 + params.theta.iter().fold(0.0, |m: f64, t| m.max(t.abs()))) {
            if !config.checkpoint_epochs.contains(&it) {
                out.push(record(params, mask, config, it));
            }
            return Ok(out);
        }
    }
    Err(Error::NotConverged(format!(
        "Newton-Raphson did not reach step tolerance {:e} in {} iterations",
        config.tol, config.epochs
    )))
}

fn train_sgd(
    spec: &ModelSpec,
    dataset: &Dataset,
    mask: &SubsetMask,
    config: &TrainConfig,
) -> Result<Vec<CheckpointRecord>> {
    let mut params = ModelParams::init(spec, seed::derive(config.seed, seed::TAG_TRAIN, 0));
    let p = spec.param_count();
    let mut velocity = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut order = mask.indices();
    let mut out = Vec::new();
    for epoch in 1..=config.epochs {
        let mut rng = seed::rng(config.seed, seed::TAG_SHUFFLE, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let lr = config.lr_at(epoch);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let g = match models::grad_loss(spec, &params, dataset.get(i)) {
                    Ok(g) => g,
                    Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
                    Err(e) => return Err(e),
                };
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for ((v, g), t) in velocity.iter_mut().zip(&grad).zip(&params.theta) {
                *v = config.momentum * *v + g * inv + config.l2_ridge * t;
            }
            for (t, v) in params.theta.iter_mut().zip(&velocity) {
                *t -= lr * v;
            }
        }
        if params.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let wanted = if config.checkpoint_epochs.is_empty() {
            epoch == config.epochs
        } else {
            config.checkpoint_epochs.contains(&epoch)
        };
        if wanted {
            out.push(record(params.clone(), mask, config, epoch));
        }
    }
    Ok(out)
}

/// Trains `M` models on fresh `α`-subsets. Run `m` uses mask seed
/// `(seed, m)` and training seed `derive(seed, TRAIN, m)`. With several
/// checkpoint epochs configured, every checkpoint becomes its own ensemble
/// member (the trajectory economy mode); `model_index` numbers all records
/// consecutively and `run_index` identifies the run.
pub fn build_ensemble(
    spec: &ModelSpec,
    dataset: &Dataset,
    alpha: f64,
    members: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<CheckpointRecord>> {
    if members == 0 {
        return Err(Error::invalid("ensemble size must be positive"));
    }
    let masks = sample_subsets(dataset.len(), alpha, members, seed)?;
    let runs: Vec<Vec<CheckpointRecord>> = masks
        .par_iter()
        .enumerate()
        .map(|(m, mask)| {
            let cfg = config.clone().with_seed(seed::derive(seed, seed::TAG_TRAIN, m as u64));
            let mut recs = train(spec, dataset, mask, &cfg)?;
            for r in &mut recs {
                r.run_index = m;
            }
            Ok(recs)
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<CheckpointRecord> = runs.into_iter().flatten().collect();
    for (i, r) in out.iter_mut().enumerate() {
        r.model_index = i;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::synthetic::{gaussian_blobs, logistic_family};
    use crate::models::{Activation, Example};

    #[test]
    fn mirrored_data_stays_at_origin_under_newton() {
        let x = vec![0.6, -0.2];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let data = Dataset::new(
            vec![
                Example::new(0, x.clone(), 0),
                Example::new(1, x, 1),
                Example::new(2, neg.clone(), 0),
                Example::new(3, neg, 1),
            ],
            2,
            2,
        )
        .unwrap();
        let spec = ModelSpec::logreg(2, 2);
        let recs = train(&spec, &data, &SubsetMask::full(4), &TrainConfig::newton()).unwrap();
        assert!(recs[0].params.theta.iter().all(|t| *t == 0.0));
    }

    #[test]
    fn separable_without_ridge_fails() {
        let data = Dataset::new(
            vec![
                Example::new(0, vec![1.0, 1.0], 1),
                Example::new(1, vec![-1.0, 1.0], 0),
                Example::new(2, vec![2.0, 1.0], 1),
            ],
            2,
            2,
        )
        .unwrap();
        let spec = ModelSpec::logreg(2, 2);
        let cfg = TrainConfig::newton().with_ridge(0.0);
        let res = train(&spec, &data, &SubsetMask::full(3), &cfg);
        assert!(
            matches!(
                res,
                Err(Error::Diverged { .. } | Error::NotConverged(_) | Error::Singular { .. })
            ),
            "{res:?}"
        );
    }

    #[test]
    fn newton_reaches_stationarity() {
        let (data, _) = logistic_family(200, 6, 1.5, 8, 0);
        let spec = ModelSpec::logreg(6, 2);
        let mask = SubsetMask::full(200);
        let cfg = TrainConfig::newton().with_ridge(0.0);
        let rec = train(&spec, &data, &mask, &cfg).unwrap().pop().unwrap();
        let r = newton_residual(&data, &mask, &rec.params, 0.0).unwrap();
        let worst = r.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        assert!(worst < 1e-8, "{worst}");
        let again = newton_raphson_step(&data, &mask, &rec.params, 0.0).unwrap();
        for (a, b) in again.theta.iter().zip(&rec.params.theta) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_newton_step_matches_hand_iteration() {
        // Points x=1 (label 1) and x=2 (label 0); from θ=0: p = 1/2 for both,
        // gradient term Σ q s x = 0.5·1 − 0.5·2 = −0.5, Hessian Σ r x² = 0.25·5.
        let data = Dataset::new(vec![Example::new(0, vec![1.0], 1), Example::new(1, vec![2.0], 0)], 2, 1).unwrap();
        let next = newton_raphson_step(&data, &SubsetMask::full(2), &ModelParams { theta: vec![0.0] }, 0.0).unwrap();
        assert!((next.theta[0] - (-0.5 / 1.25)).abs() < 1e-15);
    }

    #[test]
    fn huge_ridge_freezes_step() {
        let (data, _) = logistic_family(50, 3, 1.0, 1, 0);
        let start = ModelParams {
            theta: vec![0.1, -0.2, 0.3],
        };
        let next = newton_raphson_step(&data, &SubsetMask::full(50), &start, 1e12).unwrap();
        // The penalty dominates, so one step lands on the penalized optimum near 0.
        assert!(next.theta.iter().all(|t| t.abs() < 1e-9), "{:?}", next.theta);
        let zero = ModelParams::zeros(&ModelSpec::logreg(3, 2));
        let step = newton_raphson_step(&data, &SubsetMask::full(50), &zero, 1e12).unwrap();
        assert!(step.theta.iter().all(|t| t.abs() < 1e-9));
    }

    #[test]
    fn masked_out_examples_do_not_matter() {
        let data = gaussian_blobs(40, 3, 2, 2.0, 5, 0);
        let spec = ModelSpec::mlp(&[3, 4, 2], Activation::Tanh);
        let mask = SubsetMask::from_indices(40, &(0..40).step_by(2).collect::<Vec<_>>()).unwrap();
        let cfg = TrainConfig::sgd(5, 0.05, 8, 11);
        let a = train(&spec, &data, &mask, &cfg).unwrap();
        let garbage = data
            .with_example_replaced(1, Example::new(1, vec![1e6, -1e6, 3.0], 0))
            .unwrap();
        let b = train(&spec, &garbage, &mask, &cfg).unwrap();
        assert_eq!(a[0].params, b[0].params);

        let logreg = ModelSpec::logreg(3, 2);
        let n1 = train(&logreg, &data, &mask, &TrainConfig::newton()).unwrap();
        let n2 = train(&logreg, &garbage, &mask, &TrainConfig::newton()).unwrap();
        assert_eq!(n1[0].params, n2[0].params);
    }

    #[test]
    fn sgd_is_reproducible_and_learns() {
        let data = gaussian_blobs(120, 4, 3, 3.0, 2, 0);
        let spec = ModelSpec::mlp(&[4, 8, 3], Activation::Relu);
        let cfg = TrainConfig::sgd(20, 0.05, 16, 3).with_checkpoints(vec![5, 20]);
        let a = train(&spec, &data, &SubsetMask::full(120), &cfg).unwrap();
        let b = train(&spec, &data, &SubsetMask::full(120), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![5, 20]);
        assert!(models::accuracy(&spec, &a[1].params, &data) > 0.8);
    }

    #[test]
    fn ensemble_bookkeeping() {
        let data = gaussian_blobs(40, 3, 2, 2.0, 5, 0);
        let spec = ModelSpec::logreg(3, 2);
        let single = build_ensemble(&spec, &data, 1.0, 1, &TrainConfig::newton(), 4).unwrap();
        let direct = train(&spec, &data, &SubsetMask::full(40), &TrainConfig::newton()).unwrap();
        assert_eq!(single[0].params, direct[0].params);

        let recs = build_ensemble(&spec, &data, 0.5, 6, &TrainConfig::newton(), 4).unwrap();
        assert_eq!(recs.len(), 6);
        for w in recs.windows(2) {
            assert!(w[0].model_index < w[1].model_index);
        }
        for i in 0..recs.len() {
            for j in i + 1..recs.len() {
                assert_ne!(recs[i].mask, recs[j].mask);
            }
        }

        let mlp = ModelSpec::mlp(&[3, 4, 2], Activation::Tanh);
        let cfg = TrainConfig::sgd(6, 0.05, 8, 0).with_checkpoints(vec![4, 5, 6]);
        let traj = build_ensemble(&mlp, &data, 0.5, 2, &cfg, 1).unwrap();
        assert_eq!(traj.len(), 6);
        assert_eq!(
            traj.iter().map(|r| r.run_index).collect::<Vec<_>>(),
            vec![0, 0, 0, 1, 1, 1]
        );
        assert_eq!(
            traj.iter().map(|r| r.model_index).collect::<Vec<_>>(),
            (0..6).collect::<Vec<_>>()
        );
    }
}
