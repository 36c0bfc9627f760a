// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gradient- and representation-similarity baselines.

use super::scores::{AttributionMatrix, Provenance};
use crate::error::{check_len, Error, Result};
use crate::linalg::{make_projector, norm2, DenseMatrix, ProjectionSpec};
use crate::models::{self, Dataset, ModelParams, ModelSpec};
use crate::training::CheckpointRecord;

fn loss_features(
    spec: &ModelSpec,
    params: &ModelParams,
    data: &Dataset,
    projection: Option<&ProjectionSpec>,
) -> Result<DenseMatrix> {
    let g = models::grad_loss_batch(spec, params, data)?;
    match projection {
        Some(p) => {
            check_len("projection input_dim", spec.param_count(), p.input_dim)?;
            make_projector(p.clone())?.project_batch(&g)
        }
        None => Ok(g),
    }
}

fn normalize_rows(m: &mut DenseMatrix) {
    let cols = m.cols();
    if cols == 0 {
        return;
    }
    for row in m.as_mut_slice().chunks_exact_mut(cols) {
        let norm = norm2(row);
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn checkpoint_sum(
    checkpoints: &[CheckpointRecord],
    lrs: &[f64],
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    projection: Option<&ProjectionSpec>,
    cosine: bool,
    tag: &str,
) -> Result<AttributionMatrix> {
    check_len("learning rates per checkpoint", checkpoints.len(), lrs.len())?;
    if checkpoints.is_empty() {
        return Err(Error::invalid(format!("{tag} needs at least one checkpoint")));
    }
    spec.check_dataset(train)?;
    spec.check_dataset(test)?;
    let mut total = DenseMatrix::zeros(test.len(), train.len());
    for (ck, &lr) in checkpoints.iter().zip(lrs) {
        ck.params.check(spec)?;
        let mut a = loss_features(spec, &ck.params, test, projection)?;
        let mut b = loss_features(spec, &ck.params, train, projection)?;
        if cosine {
            normalize_rows(&mut a);
            normalize_rows(&mut b);
        }
        total.add_assign(&a.matmul_transb(&b)?.scaled(lr))?;
    }
    AttributionMatrix::new(
        total,
        tag,
        Provenance {
            checkpoint_ids: checkpoints.iter().map(|c| c.model_index).collect(),
            spec_hash: spec.content_hash(),
            dataset_hash: train.content_hash(),
        },
    )
}

/// TracIn: `Σ_t η_t ⟨P∇L(z; θ_t), P∇L(z_i; θ_t)⟩`. `projection = None` uses
/// raw gradients.
pub fn tracin(
    checkpoints: &[CheckpointRecord],
    lrs: &[f64],
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    projection: Option<&ProjectionSpec>,
) -> Result<AttributionMatrix> {
    checkpoint_sum(checkpoints, lrs, spec, train, test, projection, false, "tracin")
}

/// Gradient aggregated similarity: TracIn with cosine similarity. A zero
/// gradient contributes 0.
pub fn gas(
    checkpoints: &[CheckpointRecord],
    lrs: &[f64],
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    projection: Option<&ProjectionSpec>,
) -> Result<AttributionMatrix> {
    checkpoint_sum(checkpoints, lrs, spec, train, test, projection, true, "gas")
}

/// `⟨rep(z), rep(z_i)⟩`, negated when the labels differ.
pub fn representation_similarity(
    checkpoint: &CheckpointRecord,
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
) -> Result<AttributionMatrix> {
    spec.check_dataset(train)?;
    spec.check_dataset(test)?;
    checkpoint.params.check(spec)?;
    let width = spec.representation_dim();
    let reps = |d: &Dataset| {
        let flat: Vec<f64> = d
            .iter()
            .flat_map(|ex| models::representation(spec, &checkpoint.params, &ex.x))
            .collect();
        DenseMatrix::from_vec(d.len(), width, flat)
    };
    let mut scores = reps(test)?.matmul_transb(&reps(train)?)?;
    for t in 0..test.len() {
        let yt = test.get(t).y;
        for (i, v) in scores.row_mut(t).iter_mut().enumerate() {
            if train.get(i).y != yt {
                *v = -*v;
            }
        }
    }
    AttributionMatrix::new(
        scores,
        "repsim",
        Provenance {
            checkpoint_ids: vec![checkpoint.model_index],
            spec_hash: spec.content_hash(),
            dataset_hash: train.content_hash(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::models::synthetic::gaussian_blobs_split;
    use crate::models::{Activation, Example};
    use crate::training::SubsetMask;

    fn ck(params: ModelParams) -> CheckpointRecord {
        CheckpointRecord {
            params,
            mask: SubsetMask::full(0),
            seed: 0,
            epoch: 1,
            model_index: 0,
            run_index: 0,
        }
    }

    fn setup() -> (ModelSpec, Dataset, Dataset, Vec<CheckpointRecord>) {
        let (train, test) = gaussian_blobs_split(12, 4, 3, 2, 2.0, 8);
        let spec = ModelSpec::mlp(&[3, 4, 2], Activation::Tanh);
        let cks = (0..3).map(|s| ck(ModelParams::init(&spec, s))).collect();
        (spec, train, test, cks)
    }

    #[test]
    fn zero_learning_rates_give_zero() {
        let (spec, train, test, cks) = setup();
        let t = tracin(&cks, &[0.0; 3], &spec, &train, &test, None).unwrap();
        assert!(t.scores.as_slice().iter().all(|v| *v == 0.0));
        assert!(tracin(&cks, &[1.0; 2], &spec, &train, &test, None).is_err());
    }

    #[test]
    fn tracin_matches_brute_force() {
        let (spec, train, test, cks) = setup();
        let lrs = [0.5, 0.25, 0.1];
        let t = tracin(&cks, &lrs, &spec, &train, &test, None).unwrap();
        for a in 0..test.len() {
            for b in 0..train.len() {
                let want: f64 = cks
                    .iter()
                    .zip(lrs)
                    .map(|(c, lr)| {
                        let ga = models::grad_loss(&spec, &c.params, test.get(a)).unwrap();
                        let gb = models::grad_loss(&spec, &c.params, train.get(b)).unwrap();
                        lr * dot(&ga, &gb)
                    })
                    .sum();
                assert!((t.scores.get(a, b) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projected_tracin_approximates_raw() {
        let (spec, train, test, cks) = setup();
        let p = spec.param_count();
        let proj = ProjectionSpec::new(5, p, 4096);
        let raw = tracin(&cks[..1], &[1.0], &spec, &train, &test, None).unwrap();
        let approx = tracin(&cks[..1], &[1.0], &spec, &train, &test, Some(&proj)).unwrap();
        let scale = raw.scores.max_abs();
        let mut errs: Vec<f64> = raw
            .scores
            .as_slice()
            .iter()
            .zip(approx.scores.as_slice())
            .map(|(a, b)| (a - b).abs() / scale)
            .collect();
        errs.sort_by(f64::total_cmp);
        assert!(errs[errs.len() / 2] < 0.1, "{}", errs[errs.len() / 2]);
    }

    #[test]
    fn duplicated_train_example_gives_identical_columns() {
        let (spec, train, test, cks) = setup();
        let mut exs = train.examples().to_vec();
        let mut dup = exs[3].clone();
        dup.id = 1000;
        exs.push(dup);
        let train2 = Dataset::new(exs, 2, 3).unwrap();
        let t = tracin(&cks, &[1.0; 3], &spec, &train2, &test, None).unwrap();
        assert_eq!(t.scores.column(3), t.scores.column(train2.len() - 1));
    }

    #[test]
    fn gas_is_scale_invariant_and_self_similar() {
        // Logreg loss gradients are −σ(−f)·s·x, so scaling x by 10 rescales the
        // gradient direction-preservingly only when σ(−f) is unchanged, i.e. θ=0.
        let spec = ModelSpec::logreg(2, 2);
        let zero = ck(ModelParams::zeros(&spec));
        let train = Dataset::new(
            vec![Example::new(0, vec![1.0, 2.0], 1), Example::new(1, vec![-0.5, 0.3], 0)],
            2,
            2,
        )
        .unwrap();
        let scaled = Dataset::new(
            vec![
                Example::new(0, vec![10.0, 20.0], 1),
                Example::new(1, vec![-0.5, 0.3], 0),
            ],
            2,
            2,
        )
        .unwrap();
        let test = Dataset::new(vec![Example::new(9, vec![1.0, 2.0], 1)], 2, 2).unwrap();
        let a = gas(std::slice::from_ref(&zero), &[2.0], &spec, &train, &test, None).unwrap();
        let b = gas(&[zero], &[2.0], &spec, &scaled, &test, None).unwrap();
        assert!((a.scores.get(0, 0) - b.scores.get(0, 0)).abs() < 1e-12);
        assert!((a.scores.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((a.scores.get(0, 1) - b.scores.get(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn gas_zero_gradient_contributes_zero() {
        let spec = ModelSpec::logreg(2, 2);
        let zero = ck(ModelParams::zeros(&spec));
        let train = Dataset::new(vec![Example::new(0, vec![0.0, 0.0], 1)], 2, 2).unwrap();
        let test = Dataset::new(vec![Example::new(1, vec![1.0, 0.0], 1)], 2, 2).unwrap();
        let t = gas(&[zero], &[1.0], &spec, &train, &test, None).unwrap();
        assert_eq!(t.scores.get(0, 0), 0.0);
    }

    #[test]
    fn repsim_signs_and_brute_force() {
        let spec = ModelSpec::logreg(2, 2);
        let c = ck(ModelParams::zeros(&spec));
        let xs = [[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [-1.0, -1.0], [0.0, 2.0]];
        let ys = [0, 1, 1, 0, 1];
        let train = Dataset::new(
            xs.iter()
                .zip(ys)
                .enumerate()
                .map(|(i, (x, y))| Example::new(i as u64, x.to_vec(), y))
                .collect(),
            2,
            2,
        )
        .unwrap();
        let t = representation_similarity(&c, &spec, &train, &train).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let s = if ys[a] == ys[b] { 1.0 } else { -1.0 };
                assert_eq!(t.scores.get(a, b), s * dot(&xs[a], &xs[b]));
            }
            assert!(t.scores.get(a, a) > 0.0);
        }
        let flipped = Dataset::new(vec![Example::new(0, vec![1.0, 2.0], 1)], 2, 2).unwrap();
        let u = representation_similarity(&c, &spec, &train, &flipped).unwrap();
        assert_eq!(u.scores.get(0, 0), -5.0);
    }
}
