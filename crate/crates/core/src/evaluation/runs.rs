// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::models::{self, Dataset, ModelParams, ModelSpec};
use crate::seed;
use crate::training::{sample_subsets, train, SubsetMask, TrainConfig};

/// One training subset with the test outputs of models trained on it,
/// averaged over repetitions that share the mask and differ in seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRun {
    pub mask: SubsetMask,
    pub rep_seeds: Vec<u64>,
    pub outputs: Vec<f64>,
}

impl SubsetRun {
    pub fn new(mask: SubsetMask, rep_seeds: Vec<u64>, outputs: Vec<f64>) -> Result<Self> {
        if rep_seeds.is_empty() {
            return Err(Error::invalid("a subset run needs at least one repetition"));
        }
        crate::error::check_finite("subset run outputs", &outputs)?;
        Ok(SubsetRun {
            mask,
            rep_seeds,
            outputs,
        })
    }
}

/// Checks that `runs` share one mask length and one output length.
pub(crate) fn check_runs(runs: &[SubsetRun], n_train: usize, n_test: usize) -> Result<()> {
    for r in runs {
        check_len("run mask length", n_train, r.mask.len())?;
        check_len("run output length", n_test, r.outputs.len())?;
    }
    Ok(())
}

/// A model family plus optimizer settings that can be retrained on any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrainer {
    pub spec: ModelSpec,
    pub config: TrainConfig,
}

impl Retrainer {
    pub fn new(spec: ModelSpec, config: TrainConfig) -> Self {
        Retrainer { spec, config }
    }

    /// Final parameters after training on `mask` with the given seed.
    pub fn fit(&self, data: &Dataset, mask: &SubsetMask, seed: u64) -> Result<ModelParams> {
        let mut cfg = self.config.clone().with_seed(seed);
        cfg.checkpoint_epochs.clear();
        let mut recs = train(&self.spec, data, mask, &cfg)?;
        Ok(recs.pop().expect("train emits a final checkpoint").params)
    }

    /// `output_fn` on every test example, averaged over one model per seed.
    pub fn mean_outputs(&self, data: &Dataset, mask: &SubsetMask, test: &Dataset, seeds: &[u64]) -> Result<Vec<f64>> {
        let per_seed = seeds
            .par_iter()
            .map(|&s| {
                let params = self.fit(data, mask, s)?;
                models::outputs(&self.spec, &params, test)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(average(&per_seed, test.len()))
    }
}

fn average(rows: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= rows.len() as f64);
    out
}

/// Trains `m × reps` models on `m` fresh `α`-subsets and records the averaged
/// test outputs. Masks come from `derive(seed, RUNS, 0)`, so they differ from
/// an ensemble built with the same `seed`; rep `r` of run `j` trains with
/// `derive(seed, REP, j·reps + r)`.
pub fn produce_runs(
    retrainer: &Retrainer,
    train_set: &Dataset,
    test: &Dataset,
    alpha: f64,
    m: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<SubsetRun>> {
    if reps == 0 {
        return Err(Error::invalid("reps must be positive"));
    }
    let masks = sample_subsets(train_set.len(), alpha, m, seed::derive(seed, seed::TAG_RUNS, 0))?;
    let jobs: Vec<(usize, u64)> = (0..m)
        .flat_map(|j| (0..reps).map(move |r| (j, seed::derive(seed, seed::TAG_REP, (j * reps + r) as u64))))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(j, s)| {
            let params = retrainer.fit(train_set, &masks[j], s)?;
            models::outputs(&retrainer.spec, &params, test)
        })
        .collect::<Result<Vec<_>>>()?;
    masks
        .into_iter()
        .enumerate()
        .map(|(j, mask)| {
            let slice = &outputs[j * reps..(j + 1) * reps];
            let seeds = jobs[j * reps..(j + 1) * reps].iter().map(|(_, s)| *s).collect();
            SubsetRun::new(mask, seeds, average(slice, test.len()))
        })
        .collect()
}
