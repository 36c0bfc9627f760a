// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::runs::{check_runs, SubsetRun};
use super::stats::{quantile_sorted, spearman};
use crate::attribution::AttributionMatrix;
use crate::error::{check_len, Error, Result};
use crate::seed;
use crate::training::SubsetMask;

pub const MIN_RUNS: usize = 2;

/// `Σ_{i ∈ S'} τ_i`.
pub fn attribution_prediction(tau_row: &[f64], mask: &SubsetMask) -> Result<f64> {
    check_len("attribution row vs mask", mask.len(), tau_row.len())?;
    Ok(tau_row
        .iter()
        .zip(mask.bits())
        .filter(|(_, b)| **b)
        .map(|(t, _)| t)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdsOptions {
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for LdsOptions {
    fn default() -> Self {
        LdsOptions {
            bootstrap_resamples: 1000,
            confidence: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdsReport {
    pub per_example_rho: Vec<f64>,
    /// Test examples whose outputs or predictions were constant across runs.
    pub degenerate: Vec<bool>,
    pub mean_lds: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
    pub alpha: f64,
    pub reps: usize,
}

impl LdsReport {
    /// `metric,value` lines followed by `test_index,rho,degenerate` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str("metric,value\n");
        s.push_str(&format!("mean_lds,{}\n", self.mean_lds));
        s.push_str(&format!("ci_low,{}\n", self.ci_low));
        s.push_str(&format!("ci_high,{}\n", self.ci_high));
        s.push_str(&format!("runs,{}\n", self.runs));
        s.push_str(&format!("alpha,{}\n", self.alpha));
        s.push_str(&format!("reps,{}\n", self.reps));
        s.push_str("\ntest_index,rho,degenerate\n");
        for (t, (r, d)) in self.per_example_rho.iter().zip(&self.degenerate).enumerate() {
            s.push_str(&format!("{t},{r},{d}\n"));
        }
        s
    }
}

/// `preds[t][j]` = prediction of run `j` for test `t`; `outs[t][j]` likewise.
type Table = Vec<Vec<f64>>;

fn tables(t: &AttributionMatrix, runs: &[SubsetRun]) -> Result<(Table, Table)> {
    let n_test = t.n_test();
    let mut preds = vec![Vec::with_capacity(runs.len()); n_test];
    let mut outs = vec![Vec::with_capacity(runs.len()); n_test];
    for run in runs {
        for tt in 0..n_test {
            preds[tt].push(attribution_prediction(t.row(tt), &run.mask)?);
            outs[tt].push(run.outputs[tt]);
        }
    }
    Ok((preds, outs))
}

fn mean_rho(preds: &[Vec<f64>], outs: &[Vec<f64>], idx: Option<&[usize]>) -> Result<f64> {
    let mut total = 0.0;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (p, o) in preds.iter().zip(outs) {
        let s = match idx {
            None => spearman(o, p)?,
            Some(ix) => {
                a.clear();
                b.clear();
                a.extend(ix.iter().map(|&j| o[j]));
                b.extend(ix.iter().map(|&j| p[j]));
                spearman(&a, &b)?
            }
        };
        total += s.rho;
    }
    Ok(total / preds.len().max(1) as f64)
}

/// Linear datamodeling score with the default 1000-resample bootstrap.
pub fn lds(t: &AttributionMatrix, runs: &[SubsetRun]) -> Result<LdsReport> {
    lds_with(t, runs, &LdsOptions::default())
}

/// Per test example, Spearman between measured outputs and masked-sum
/// predictions across runs; mean over examples; percentile bootstrap CI by
/// resampling runs with replacement (widened to contain the point estimate).
pub fn lds_with(t: &AttributionMatrix, runs: &[SubsetRun], opts: &LdsOptions) -> Result<LdsReport> {
    if runs.len() < MIN_RUNS {
        return Err(Error::InsufficientRuns {
            needed: MIN_RUNS,
            found: runs.len(),
        });
    }
    check_runs(runs, t.n_train(), t.n_test())?;
    if t.n_test() == 0 {
        return Err(Error::invalid("LDS needs at least one test example"));
    }
    let (preds, outs) = tables(t, runs)?;
    let mut per_example_rho = Vec::with_capacity(t.n_test());
    let mut degenerate = Vec::with_capacity(t.n_test());
    for (p, o) in preds.iter().zip(&outs) {
        let s = spearman(o, p)?;
        per_example_rho.push(s.rho);
        degenerate.push(s.degenerate);
    }
    let mean_lds = per_example_rho.iter().sum::<f64>() / per_example_rho.len() as f64;

    let m = runs.len();
    let (ci_low, ci_high) = if opts.bootstrap_resamples == 0 {
        (mean_lds, mean_lds)
    } else {
        let mut stats = (0..opts.bootstrap_resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = seed::rng(opts.seed, seed::TAG_BOOT, b as u64);
                let idx: Vec<usize> = (0..m).map(|_| rng.gen_range(0..m)).collect();
                mean_rho(&preds, &outs, Some(&idx))
            })
            .collect::<Result<Vec<_>>>()?;
        stats.sort_by(f64::total_cmp);
        let tail = (1.0 - opts.confidence) / 2.0;
        (
            quantile_sorted(&stats, tail).min(mean_lds),
            quantile_sorted(&stats, 1.0 - tail).max(mean_lds),
        )
    };

    let n = t.n_train().max(1) as f64;
    let alpha = runs.iter().map(|r| r.mask.count() as f64 / n).sum::<f64>() / m as f64;
    let reps = runs.iter().map(|r| r.rep_seeds.len()).min().unwrap_or(0);
    Ok(LdsReport {
        per_example_rho,
        degenerate,
        mean_lds,
        ci_low,
        ci_high,
        runs: m,
        alpha,
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::Provenance;
    use crate::linalg::DenseMatrix;
    use crate::training::sample_subsets;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prediction_examples() {
        let tau = [1.0, -2.0, 3.0];
        assert_eq!(attribution_prediction(&tau, &SubsetMask::empty(3)).unwrap(), 0.0);
        assert_eq!(attribution_prediction(&tau, &SubsetMask::full(3)).unwrap(), 2.0);
        let m = SubsetMask::from_indices(3, &[0, 2]).unwrap();
        assert_eq!(attribution_prediction(&tau, &m).unwrap(), 4.0);
        assert!(attribution_prediction(&tau, &SubsetMask::full(2)).is_err());
    }

    fn planted(n: usize, n_test: usize, m: usize, seed: u64) -> (AttributionMatrix, Vec<SubsetRun>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = DenseMatrix::from_fn(n_test, n, |_, _| rng.gen_range(-1.0..1.0));
        let t = AttributionMatrix::new(tau, "planted", Provenance::default()).unwrap();
        let runs = sample_subsets(n, 0.5, m, seed)
            .unwrap()
            .into_iter()
            .map(|mask| {
                let outs = (0..n_test)
                    .map(|r| attribution_prediction(t.row(r), &mask).unwrap())
                    .collect();
                SubsetRun::new(mask, vec![0], outs).unwrap()
            })
            .collect();
        (t, runs)
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let (t, runs) = planted(20, 3, 16, 1);
        let r = lds(&t, &runs).unwrap();
        assert!((r.mean_lds - 1.0).abs() < 1e-12);
        assert!(r.ci_low <= r.mean_lds && r.mean_lds <= r.ci_high);
        assert!((r.alpha - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_runs() {
        let (t, runs) = planted(10, 1, 1, 2);
        assert!(matches!(
            lds(&t, &runs),
            Err(Error::InsufficientRuns { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn monotone_transform_of_row_keeps_lds() {
        let (t, runs) = planted(20, 2, 12, 3);
        let noisy: Vec<SubsetRun> = runs
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let outs = r.outputs.iter().map(|o| o + ((j * 7) as f64).sin()).collect();
                SubsetRun::new(r.mask.clone(), vec![0], outs).unwrap()
            })
            .collect();
        let base = lds_with(
            &t,
            &noisy,
            &LdsOptions {
                bootstrap_resamples: 0,
                ..Default::default()
            },
        )
        .unwrap();
        // Scaling τ by a > 0 scales predictions; adding b/(α·n) to every entry
        // shifts them by b because all masks have the same size.
        let shifted = t
            .with_scores(
                DenseMatrix::from_fn(2, 20, |i, j| 3.0 * t.scores.get(i, j) + 0.5 / 10.0),
                "shifted",
            )
            .unwrap();
        let other = lds_with(
            &shifted,
            &noisy,
            &LdsOptions {
                bootstrap_resamples: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(base.per_example_rho, other.per_example_rho);
    }

    #[test]
    fn csv_has_rows() {
        let (t, runs) = planted(10, 2, 6, 4);
        let csv = lds(&t, &runs).unwrap().to_csv();
        assert!(csv.starts_with("metric,value\nmean_lds,"));
        assert_eq!(
            csv.lines()
                .filter(|l| l.starts_with("0,") || l.starts_with("1,"))
                .count(),
            2
        );
    }
}
