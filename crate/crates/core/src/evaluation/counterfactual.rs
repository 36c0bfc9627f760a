// SPDX-License-Identifier: MIT OR Apache-2.0

//! Retraining experiments that remove the top-scored training examples.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::runs::Retrainer;
use crate::error::{check_len, Error, Result};
use crate::models::{self, Dataset, Example};
use crate::seed;
use crate::training::SubsetMask;

/// Indices by descending score, ties broken by ascending index.
pub fn removal_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Uniformly random removal order.
pub fn random_order(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, seed::TAG_RANDOM_ORDER, 0));
    idx
}

fn rep_seeds(seed: u64, reps: usize) -> Vec<u64> {
    (0..reps as u64).map(|r| seed::derive(seed, seed::TAG_REP, r)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetOutcome {
    pub budget: usize,
    pub misclassified: usize,
    pub reps: usize,
}

impl BudgetOutcome {
    pub fn flipped(&self) -> bool {
        2 * self.misclassified > self.reps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrittlenessResult {
    /// Smallest evaluated budget at which a majority of retrained models
    /// misclassify the target, if any.
    pub flip_budget: Option<usize>,
    /// Budgets evaluated in ascending order, stopping at the first flip.
    pub evaluated: Vec<BudgetOutcome>,
}

fn misclassified(
    retrainer: &Retrainer,
    data: &Dataset,
    mask: &SubsetMask,
    target: &Example,
    seeds: &[u64],
) -> Result<usize> {
    let wrong = seeds
        .par_iter()
        .map(|&s| {
            let params = retrainer.fit(data, mask, s)?;
            Ok(usize::from(
                models::predict(&retrainer.spec, &params, target) != target.y,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(wrong.into_iter().sum())
}

/// Brittleness under the removal order implied by `tau_row`.
pub fn brittleness(
    tau_row: &[f64],
    data: &Dataset,
    retrainer: &Retrainer,
    target: &Example,
    budgets: &[usize],
    reps: usize,
    seed: u64,
) -> Result<BrittlenessResult> {
    check_len("attribution row", data.len(), tau_row.len())?;
    brittleness_with_order(&removal_order(tau_row), data, retrainer, target, budgets, reps, seed)
}

/// Removes the first `k` indices of `order` for each budget `k` (ascending)
/// and retrains `reps` times with seeds shared across budgets. Fails if the
/// target is not correctly classified by a majority of full-data models.
pub fn brittleness_with_order(
    order: &[usize],
    data: &Dataset,
    retrainer: &Retrainer,
    target: &Example,
    budgets: &[usize],
    reps: usize,
    seed: u64,
) -> Result<BrittlenessResult> {
    let n = data.len();
    check_len("removal order", n, order.len())?;
    if reps == 0 {
        return Err(Error::invalid("reps must be positive"));
    }
    let mut sorted = budgets.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&b) = sorted.iter().find(|&&b| b >= n) {
        return Err(Error::invalid(format!("budget {b} leaves no training data (n = {n})")));
    }
    let seeds = rep_seeds(seed, reps);
    let base = misclassified(retrainer, data, &SubsetMask::full(n), target, &seeds)?;
    if 2 * base >= reps {
        return Err(Error::invalid(format!(
            "target {} is not correctly classified by the full-data models ({base}/{reps} wrong)",
            target.id
        )));
    }
    let mut evaluated = Vec::new();
    for k in sorted {
        let mask = SubsetMask::full(n).without(&order[..k]);
        let wrong = misclassified(retrainer, data, &mask, target, &seeds)?;
        let outcome = BudgetOutcome {
            budget: k,
            misclassified: wrong,
            reps,
        };
        evaluated.push(outcome);
        if outcome.flipped() {
            return Ok(BrittlenessResult {
                flip_budget: Some(k),
                evaluated,
            });
        }
    }
    Ok(BrittlenessResult {
        flip_budget: None,
        evaluated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    /// Per target, mean over reps of `f(full) − f(without top k)`.
    pub drops: Vec<f64>,
    pub mean_drop: f64,
    pub k: usize,
    pub reps: usize,
}

impl CounterfactualReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("target_index,drop\n");
        for (t, d) in self.drops.iter().enumerate() {
            s.push_str(&format!("{t},{d}\n"));
        }
        s.push_str(&format!("mean,{}\n", self.mean_drop));
        s
    }
}

/// For each target, removes the first `k` entries of its removal order,
/// retrains `reps` times, and measures the drop in `output_fn` relative to
/// full-data models trained with the same seeds.
pub fn counterfactual_removal(
    orders: &[Vec<usize>],
    data: &Dataset,
    retrainer: &Retrainer,
    targets: &Dataset,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<CounterfactualReport> {
    let n = data.len();
    check_len("removal orders per target", targets.len(), orders.len())?;
    if k >= n {
        return Err(Error::invalid(format!("k = {k} must be below n = {n}")));
    }
    if reps == 0 {
        return Err(Error::invalid("reps must be positive"));
    }
    for o in orders {
        check_len("removal order", n, o.len())?;
    }
    let seeds = rep_seeds(seed, reps);
    let full = retrainer.mean_outputs(data, &SubsetMask::full(n), targets, &seeds)?;
    let drops = (0..targets.len())
        .into_par_iter()
        .map(|t| {
            let mask = SubsetMask::full(n).without(&orders[t][..k]);
            let single = targets.subset(&[t]);
            let ablated = retrainer.mean_outputs(data, &mask, &single, &seeds)?;
            Ok(full[t] - ablated[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_drop = drops.iter().sum::<f64>() / drops.len().max(1) as f64;
    Ok(CounterfactualReport {
        drops,
        mean_drop,
        k,
        reps,
    })
}
