// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimators fit directly on subset-retraining runs: empirical influence
//! (difference in means) and lasso datamodels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::{AttributionMatrix, Provenance};
use crate::error::{Error, Result};
use crate::evaluation::SubsetRun;
use crate::linalg::DenseMatrix;

fn check_runs(runs: &[SubsetRun], test_index: usize, needed: usize) -> Result<usize> {
    if runs.len() < needed {
        return Err(Error::InsufficientRuns {
            needed,
            found: runs.len(),
        });
    }
    let n = runs[0].mask.len();
    for r in runs {
        if r.mask.len() != n {
            return Err(Error::invalid("runs have different mask lengths"));
        }
        if test_index >= r.outputs.len() {
            return Err(Error::invalid(format!(
                "test index {test_index} out of range {}",
                r.outputs.len()
            )));
        }
    }
    Ok(n)
}

/// `E[f | z_i ∈ S'] − E[f | z_i ∉ S']` per training index; `None` where one
/// side has no runs.
pub fn empirical_influence(runs: &[SubsetRun], test_index: usize) -> Result<Vec<Option<f64>>> {
    let n = check_runs(runs, test_index, 1)?;
    let mut sum_in = vec![0.0; n];
    let mut cnt_in = vec![0usize; n];
    let total: f64 = runs.iter().map(|r| r.outputs[test_index]).sum();
    for r in runs {
        let y = r.outputs[test_index];
        for (i, b) in r.mask.bits().iter().enumerate() {
            if *b {
                sum_in[i] += y;
                cnt_in[i] += 1;
            }
        }
    }
    let m = runs.len();
    Ok((0..n)
        .map(|i| {
            let (ci, co) = (cnt_in[i], m - cnt_in[i]);
            (ci > 0 && co > 0).then(|| sum_in[i] / ci as f64 - (total - sum_in[i]) / co as f64)
        })
        .collect())
}

/// Empirical influence for every test example. Fails if any training index
/// is one-sided.
pub fn empirical_influence_matrix(runs: &[SubsetRun]) -> Result<AttributionMatrix> {
    let n_test = runs.first().map(|r| r.outputs.len()).unwrap_or(0);
    let n = check_runs(runs, 0, 1)?;
    let mut scores = DenseMatrix::zeros(n_test, n);
    for t in 0..n_test {
        for (i, v) in empirical_influence(runs, t)?.into_iter().enumerate() {
            let v = v.ok_or_else(|| Error::invalid(format!("training index {i} is in every run or in none")))?;
            scores.set(t, i, v);
        }
    }
    AttributionMatrix::new(scores, "emp-inf", Provenance::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub l1: f64,
    /// Stop when a full sweep changes no coefficient by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl LassoConfig {
    pub fn new(l1: f64) -> Self {
        LassoConfig {
            l1,
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatamodelFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
}

/// Centered design shared by every test index.
struct Design {
    gram: DenseMatrix,
    /// Column means of the indicator matrix.
    means: Vec<f64>,
    x: DenseMatrix,
    m: usize,
}

impl Design {
    fn new(runs: &[SubsetRun]) -> Result<Self> {
        let m = runs.len();
        let n = runs[0].mask.len();
        let x = DenseMatrix::from_fn(m, n, |j, i| f64::from(u8::from(runs[j].mask.contains(i))));
        let means: Vec<f64> = (0..n).map(|i| x.column(i).iter().sum::<f64>() / m as f64).collect();
        let mut xc = x.clone();
        for j in 0..m {
            for (v, mu) in xc.row_mut(j).iter_mut().zip(&means) {
                *v -= mu;
            }
        }
        Ok(Design {
            gram: xc.gram(),
            means,
            x: xc,
            m,
        })
    }

    /// Coordinate descent on `(1/m)‖y − β₀ − Xβ‖² + l1‖β‖₁`.
    fn solve(&self, y: &[f64], cfg: &LassoConfig) -> Result<DatamodelFit> {
        let n = self.gram.rows();
        let m = self.m as f64;
        let y_mean = y.iter().sum::<f64>() / m;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        // g = Xcᵀ(yc − Xcβ), maintained as β changes.
        let mut g = vec![0.0; n];
        for j in 0..self.m {
            let row = self.x.row(j);
            for (gi, xv) in g.iter_mut().zip(row) {
                *gi += xv * yc[j];
            }
        }
        let mut beta = vec![0.0; n];
        let scale = 2.0 / m;
        for sweep in 1..=cfg.max_sweeps {
            let mut max_change: f64 = 0.0;
            for i in 0..n {
                let a = scale * self.gram.get(i, i);
                if a <= 0.0 {
                    continue;
                }
                let c = scale * g[i] + a * beta[i];
                let new = if c > cfg.l1 {
                    (c - cfg.l1) / a
                } else if c < -cfg.l1 {
                    (c + cfg.l1) / a
                } else {
                    0.0
                };
                let delta = new - beta[i];
                if delta != 0.0 {
                    for (gk, gik) in g.iter_mut().zip(self.gram.row(i)) {
                        *gk -= delta * gik;
                    }
                    beta[i] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < cfg.tol {
                let intercept = y_mean - beta.iter().zip(&self.means).map(|(b, mu)| b * mu).sum::<f64>();
                return Ok(DatamodelFit {
                    weights: beta,
                    intercept,
                    sweeps: sweep,
                });
            }
        }
        Err(Error::NotConverged(format!(
            "lasso coordinate descent hit {} sweeps",
            cfg.max_sweeps
        )))
    }
}

/// Lasso regression from mask indicators to the outputs of test example
/// `test_index`, with an unpenalized intercept.
pub fn datamodel_fit(runs: &[SubsetRun], test_index: usize, l1: f64) -> Result<DatamodelFit> {
    datamodel_fit_with(runs, test_index, &LassoConfig::new(l1))
}

pub fn datamodel_fit_with(runs: &[SubsetRun], test_index: usize, cfg: &LassoConfig) -> Result<DatamodelFit> {
    check_runs(runs, test_index, 2)?;
    check_l1(cfg.l1)?;
    let y: Vec<f64> = runs.iter().map(|r| r.outputs[test_index]).collect();
    Design::new(runs)?.solve(&y, cfg)
}

fn check_l1(l1: f64) -> Result<()> {
    if l1.is_finite() && l1 >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("l1 must be finite and non-negative, got {l1}")))
    }
}

/// Datamodel weights for every test example, one lasso per row.
pub fn datamodel_matrix(runs: &[SubsetRun], cfg: &LassoConfig) -> Result<AttributionMatrix> {
    let n = check_runs(runs, 0, 2)?;
    check_l1(cfg.l1)?;
    let design = Design::new(runs)?;
    let n_test = runs[0].outputs.len();
    let rows = (0..n_test)
        .into_par_iter()
        .map(|t| {
            let y: Vec<f64> = runs.iter().map(|r| r.outputs[t]).collect();
            design.solve(&y, cfg).map(|f| f.weights)
        })
        .collect::<Result<Vec<_>>>()?;
    AttributionMatrix::new(
        DenseMatrix::from_vec(n_test, n, rows.concat())?,
        "datamodel",
        Provenance::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{sample_subsets, SubsetMask};

    fn runs_from(masks: Vec<SubsetMask>, f: impl Fn(&SubsetMask) -> f64) -> Vec<SubsetRun> {
        masks
            .into_iter()
            .map(|m| {
                let y = f(&m);
                SubsetRun::new(m, vec![0], vec![y]).unwrap()
            })
            .collect()
    }

    #[test]
    fn constant_outputs_give_zero_influence() {
        let runs = runs_from(sample_subsets(10, 0.5, 30, 1).unwrap(), |_| 3.0);
        let inf = empirical_influence(&runs, 0).unwrap();
        assert!(inf.iter().all(|v| v.unwrap().abs() < 1e-12));
    }

    #[test]
    fn full_masks_are_undefined() {
        let runs = runs_from(sample_subsets(6, 1.0, 5, 1).unwrap(), |m| m.count() as f64);
        assert!(empirical_influence(&runs, 0).unwrap().iter().all(Option::is_none));
        assert!(empirical_influence_matrix(&runs).is_err());
    }

    #[test]
    fn huge_l1_zeroes_weights() {
        let beta: Vec<f64> = (0..8).map(|i| i as f64 - 3.0).collect();
        let runs = runs_from(sample_subsets(8, 0.5, 40, 2).unwrap(), |m| {
            m.indices().iter().map(|&i| beta[i]).sum::<f64>() + 1.0
        });
        let fit = datamodel_fit(&runs, 0, 1e6).unwrap();
        assert!(fit.weights.iter().all(|w| *w == 0.0));
        let mean = runs.iter().map(|r| r.outputs[0]).sum::<f64>() / 40.0;
        assert!((fit.intercept - mean).abs() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_planted_weights_with_variable_sizes() {
        // Masks of varying size make β and the intercept identifiable.
        let n = 6;
        let beta = [1.0, -2.0, 0.5, 0.0, 3.0, -1.0];
        let masks: Vec<SubsetMask> = (0..64u32)
            .map(|code| SubsetMask::from_bools((0..n).map(|i| code >> i & 1 == 1).collect()))
            .collect();
        let runs = runs_from(masks, |m| 0.7 + m.indices().iter().map(|&i| beta[i]).sum::<f64>());
        let fit = datamodel_fit(&runs, 0, 0.0).unwrap();
        for (a, b) in fit.weights.iter().zip(beta) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!((fit.intercept - 0.7).abs() < 1e-7);
    }

    #[test]
    fn needs_two_runs() {
        let runs = runs_from(sample_subsets(4, 0.5, 1, 0).unwrap(), |_| 0.0);
        assert!(matches!(
            datamodel_fit(&runs, 0, 0.0),
            Err(Error::InsufficientRuns { .. })
        ));
    }
}
