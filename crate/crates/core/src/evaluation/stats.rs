// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::seed;

/// Spearman correlation with a flag for constant inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Either input was constant; `rho` is then defined as 0.
    pub degenerate: bool,
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // Positions start..end share the mean of ranks start+1..=end.
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation; `None` if either input has zero variance.
pub fn pearson(u: &[f64], v: &[f64]) -> Option<f64> {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return None;
    }
    Some((suv / (suu * svv).sqrt()).clamp(-1.0, 1.0))
}

/// Rank correlation (Pearson on average ranks).
pub fn spearman(u: &[f64], v: &[f64]) -> Result<Spearman> {
    check_len("spearman inputs", u.len(), v.len())?;
    if u.len() < 2 {
        return Err(Error::invalid("spearman needs at least 2 points"));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("spearman input"));
    }
    Ok(match pearson(&average_ranks(u), &average_ranks(v)) {
        Some(rho) => Spearman { rho, degenerate: false },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Percentile bootstrap CI for the mean of `values`, widened to contain the
/// sample mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() || resamples == 0 {
        return Err(Error::invalid("bootstrap needs data and at least one resample"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut stats: Vec<f64> = (0..resamples)
        .map(|b| {
            let mut rng = seed::rng(seed, seed::TAG_BOOT, b as u64);
            (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        quantile_sorted(&stats, tail).min(mean),
        quantile_sorted(&stats, 1.0 - tail).max(mean),
    ))
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `trials` fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let mut p = 0.0;
    let mut coef = 1.0f64;
    for k in 0..=trials {
        if k > 0 {
            coef = coef * (trials - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            p += coef;
        }
    }
    p / 2f64.powi(trials as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        let u = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&u, &u).unwrap().rho, 1.0);
        assert_eq!(spearman(&u, &[4.0, 3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        let r = spearman(&u, &[1.0, 3.0, 2.0, 4.0]).unwrap().rho;
        assert!((r - 0.8).abs() < 1e-12);
        let d = spearman(&u, &[5.0; 4]).unwrap();
        assert!(d.degenerate && d.rho == 0.0);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn tied_ranks_average() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(0, 5) - 1.0).abs() < 1e-15);
        assert!((sign_test_p(5, 5) - 1.0 / 32.0).abs() < 1e-15);
        // P(X ≥ 15 | n = 20) = 21700 / 2²⁰.
        assert!((sign_test_p(15, 20) - 21700.0 / 1048576.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_contains_mean() {
        let v: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let (lo, hi) = bootstrap_mean_ci(&v, 500, 0.95, 1).unwrap();
        let mean = v.iter().sum::<f64>() / 30.0;
        assert!(lo <= mean && mean <= hi && lo < hi);
    }
}
