// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{make_projector, DenseMatrix, ProjectionSpec};
use crate::models::{self, Dataset, ModelParams, ModelSpec};
use crate::seed;
use crate::training::{CheckpointRecord, SubsetMask};

/// Projected output-gradient features of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub model_index: usize,
    /// `n × k`, row `i` is `φ(z_i)` for dataset position `i`.
    pub train_features: DenseMatrix,
    /// `n_test × k`.
    pub test_features: DenseMatrix,
    /// `1 − p_i` for every training example, strictly inside `(0, 1)`.
    pub q_diag: Vec<f64>,
    pub mask: SubsetMask,
    pub projection: ProjectionSpec,
    #[serde(default)]
    pub dataset_hash: String,
    #[serde(default)]
    pub spec_hash: String,
}

impl FeatureBundle {
    pub fn n_train(&self) -> usize {
        self.train_features.rows()
    }

    pub fn n_test(&self) -> usize {
        self.test_features.rows()
    }

    pub fn k(&self) -> usize {
        self.train_features.cols()
    }

    /// Checks the shape and range invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        check_len("test feature width", k, self.test_features.cols())?;
        check_len("projection output_dim", self.projection.output_dim, k)?;
        check_len("q_diag length", self.n_train(), self.q_diag.len())?;
        check_len("mask length", self.n_train(), self.mask.len())?;
        self.train_features.require_finite("train features")?;
        self.test_features.require_finite("test features")?;
        if let Some(i) = self.q_diag.iter().position(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::invalid(format!(
                "q_diag[{i}] = {} is outside (0, 1)",
                self.q_diag[i]
            )));
        }
        Ok(())
    }

    /// Same bundle with every feature multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> FeatureBundle {
        FeatureBundle {
            train_features: self.train_features.scaled(c),
            test_features: self.test_features.scaled(c),
            ..self.clone()
        }
    }
}

/// Output gradients of every example, restricted to `param_mask` if given.
pub fn output_gradients(
    spec: &ModelSpec,
    params: &ModelParams,
    data: &Dataset,
    param_mask: Option<&[usize]>,
) -> Result<DenseMatrix> {
    let g = models::grad_output_batch(spec, params, data)?;
    Ok(match param_mask {
        Some(idx) => g.select_columns(idx),
        None => g,
    })
}

fn check_param_mask(spec: &ModelSpec, param_mask: Option<&[usize]>) -> Result<usize> {
    let p = spec.param_count();
    match param_mask {
        None => Ok(p),
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::invalid("parameter mask is empty"));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= p) {
                return Err(Error::invalid(format!("parameter index {bad} out of range {p}")));
            }
            Ok(idx.len())
        }
    }
}

/// Projects output gradients at a checkpoint for every training example
/// (masked-out ones included) and every test example, and records
/// `q_i = 1 − p_i` on the training set.
pub fn featurize(
    checkpoint: &CheckpointRecord,
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    projection: &ProjectionSpec,
    param_mask: Option<&[usize]>,
) -> Result<FeatureBundle> {
    spec.check_dataset(train)?;
    spec.check_dataset(test)?;
    checkpoint.params.check(spec)?;
    check_len("checkpoint mask", train.len(), checkpoint.mask.len())?;
    let active = check_param_mask(spec, param_mask)?;
    check_len("projection input_dim", active, projection.input_dim)?;
    let projector = make_projector(projection.clone())?;

    let params = &checkpoint.params;
    let train_features = projector.project_batch(&output_gradients(spec, params, train, param_mask)?)?;
    let test_features = projector.project_batch(&output_gradients(spec, params, test, param_mask)?)?;
    let q_diag = train
        .examples()
        .par_iter()
        .map(|ex| models::correct_prob(spec, params, ex).map(|p| 1.0 - p))
        .collect::<Result<Vec<_>>>()?;

    let bundle = FeatureBundle {
        model_index: checkpoint.model_index,
        train_features,
        test_features,
        q_diag,
        mask: checkpoint.mask.clone(),
        projection: projection.clone(),
        dataset_hash: train.content_hash(),
        spec_hash: spec.content_hash(),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// [`featurize`] for every checkpoint. Unless `shared_seed` is set, member
/// `m` projects with seed `derive(base.seed, PROJ, m)`.
pub fn featurize_ensemble(
    checkpoints: &[CheckpointRecord],
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    base: &ProjectionSpec,
    param_mask: Option<&[usize]>,
    shared_seed: bool,
) -> Result<Vec<FeatureBundle>> {
    checkpoints
        .iter()
        .map(|ck| {
            let mut proj = base.clone();
            if !shared_seed {
                proj.seed = seed::derive(base.seed, seed::TAG_PROJ, ck.model_index as u64);
            }
            featurize(ck, spec, train, test, &proj, param_mask)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::synthetic::gaussian_blobs_split;
    use crate::models::{Activation, ModelParams};

    fn setup() -> (ModelSpec, Dataset, Dataset, CheckpointRecord) {
        let (train, test) = gaussian_blobs_split(30, 5, 3, 3, 2.0, 1);
        let spec = ModelSpec::mlp(&[3, 5, 3], Activation::Tanh);
        let ck = CheckpointRecord {
            params: ModelParams::init(&spec, 4),
            mask: SubsetMask::full(30),
            seed: 4,
            epoch: 0,
            model_index: 0,
            run_index: 0,
        };
        (spec, train, test, ck)
    }

    #[test]
    fn full_param_mask_is_identity() {
        let (spec, train, test, ck) = setup();
        let proj = ProjectionSpec::new(1, spec.param_count(), 8);
        let a = featurize(&ck, &spec, &train, &test, &proj, None).unwrap();
        let all: Vec<usize> = (0..spec.param_count()).collect();
        let b = featurize(&ck, &spec, &train, &test, &proj, Some(&all)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn last_layer_mask_changes_input_dim() {
        let (spec, train, test, ck) = setup();
        let last = spec.last_layer_params();
        let wrong = ProjectionSpec::new(1, spec.param_count(), 8);
        assert!(featurize(&ck, &spec, &train, &test, &wrong, Some(&last)).is_err());
        let right = ProjectionSpec::new(1, last.len(), 8);
        let b = featurize(&ck, &spec, &train, &test, &right, Some(&last)).unwrap();
        assert_eq!(b.k(), 8);
    }

    #[test]
    fn q_inside_unit_interval_and_near_uniform_at_init() {
        let (spec, train, test, _) = setup();
        let mut total = 0.0;
        let mut count = 0.0;
        for s in 0..20 {
            let ck = CheckpointRecord {
                params: ModelParams::init(&spec, s),
                mask: SubsetMask::full(train.len()),
                seed: s,
                epoch: 0,
                model_index: 0,
                run_index: 0,
            };
            let proj = ProjectionSpec::new(0, spec.param_count(), 4);
            let b = featurize(&ck, &spec, &train, &test, &proj, None).unwrap();
            assert!(b.q_diag.iter().all(|q| *q > 0.0 && *q < 1.0));
            total += b.q_diag.iter().sum::<f64>();
            count += b.q_diag.len() as f64;
        }
        let mean = total / count;
        assert!((mean - 2.0 / 3.0).abs() < 0.05, "{mean}");
    }
}
