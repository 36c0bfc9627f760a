// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::scores::AttributionMatrix;
use super::trak::{soft_threshold, top_k_threshold};
use crate::error::{Error, Result};
use crate::evaluation::{lds_with, LdsOptions, SubsetRun};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    #[default]
    Off,
    /// One λ for the whole matrix.
    SoftLambda,
    /// Per-row λ leaving `k` non-zero entries; grid values are `k`.
    TopKPerRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub mode: ThresholdMode,
    pub grid: Vec<f64>,
    /// Fraction of subset runs held out for choosing the threshold.
    pub cv_fraction: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            mode: ThresholdMode::Off,
            grid: Vec::new(),
            cv_fraction: 0.5,
        }
    }
}

impl ThresholdConfig {
    fn validate(&self) -> Result<()> {
        if self.mode == ThresholdMode::Off {
            return Ok(());
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("threshold grid is empty"));
        }
        for &v in &self.grid {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "threshold grid value {v} is not a finite non-negative number"
                )));
            }
            if self.mode == ThresholdMode::TopKPerRow && v.fract() != 0.0 {
                return Err(Error::invalid(format!("top-k grid value {v} is not an integer")));
            }
        }
        Ok(())
    }
}

/// Applies one grid value under `mode`.
pub fn apply_threshold(t: &AttributionMatrix, mode: ThresholdMode, value: f64) -> Result<AttributionMatrix> {
    match mode {
        ThresholdMode::Off => Ok(t.clone()),
        ThresholdMode::SoftLambda => soft_threshold(t, value),
        ThresholdMode::TopKPerRow => top_k_threshold(t, value as usize),
    }
}

/// Splits runs into `(held_out, rest)` with `⌈fraction·m⌉` held out, chosen by seed.
pub fn split_runs(runs: &[SubsetRun], fraction: f64, seed: u64) -> Result<(Vec<SubsetRun>, Vec<SubsetRun>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("cv fraction must be in (0, 1), got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..runs.len()).collect();
    idx.shuffle(&mut seed::rng(seed, seed::TAG_RUNS, 1));
    let h = ((fraction * runs.len() as f64).ceil() as usize).min(runs.len());
    let pick = |ix: &[usize]| ix.iter().map(|&i| runs[i].clone()).collect::<Vec<_>>();
    Ok((pick(&idx[..h]), pick(&idx[h..])))
}

/// Grid search on held-out runs. Returns the value with the highest mean
/// LDS; ties go to the sparser candidate (larger λ, smaller k).
pub fn cross_validate_threshold(
    t: &AttributionMatrix,
    heldout_runs: &[SubsetRun],
    config: &ThresholdConfig,
) -> Result<(f64, AttributionMatrix)> {
    config.validate()?;
    if config.mode == ThresholdMode::Off {
        return Ok((0.0, t.clone()));
    }
    if heldout_runs.is_empty() {
        return Err(Error::invalid("threshold cross-validation needs held-out runs"));
    }
    let mut grid = config.grid.clone();
    // Sparsest first, so a strict improvement is required to move away from it.
    match config.mode {
        ThresholdMode::SoftLambda => grid.sort_by(|a, b| b.total_cmp(a)),
        _ => grid.sort_by(f64::total_cmp),
    }
    grid.dedup();
    let opts = LdsOptions {
        bootstrap_resamples: 0,
        ..LdsOptions::default()
    };
    let mut best: Option<(f64, f64, AttributionMatrix)> = None;
    for v in grid {
        let cand = apply_threshold(t, config.mode, v)?;
        let score = lds_with(&cand, heldout_runs, &opts)?.mean_lds;
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, v, cand));
        }
    }
    let (_, v, m) = best.expect("non-empty grid");
    Ok((v, m))
}
