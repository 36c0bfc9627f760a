// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic datasets used by the examples and test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::models::{sigmoid, Dataset, Example};

/// `c` isotropic Gaussian blobs in `d` dimensions. Class means are random
/// directions scaled to norm `separation`; labels cycle `0, 1, …, c−1` so
/// classes are balanced. Ids run from `id_offset`.
pub fn gaussian_blobs(n: usize, d: usize, c: usize, separation: f64, seed: u64, id_offset: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-12);
            v.iter().map(|t| t * separation / norm).collect()
        })
        .collect();
    blobs_around(&means, n, seed.wrapping_add(0x9e37_79b9), id_offset)
}

/// Train and test splits drawn around the same blob means.
pub fn gaussian_blobs_split(
    n_train: usize,
    n_test: usize,
    d: usize,
    c: usize,
    separation: f64,
    seed: u64,
) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-12);
            v.iter().map(|t| t * separation / norm).collect()
        })
        .collect();
    let train = blobs_around(&means, n_train, seed.wrapping_add(1), 0);
    let test = blobs_around(&means, n_test, seed.wrapping_add(2), n_train as u64);
    (train, test)
}

fn blobs_around(means: &[Vec<f64>], n: usize, seed: u64, id_offset: u64) -> Dataset {
    let c = means.len();
    let d = means[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let y = i % c;
            let x = means[y]
                .iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            Example::new(id_offset + i as u64, x, y)
        })
        .collect();
    Dataset::new(examples, c, d).expect("synthetic blobs are valid")
}

/// Binary data with labels drawn from a logistic model, so classes overlap
/// and the maximum-likelihood fit is finite. Features are standard normal
/// except the last, which is the constant 1 (an intercept). The true
/// weights have norm `signal`.
pub fn logistic_family(n: usize, d: usize, signal: f64, seed: u64, id_offset: u64) -> (Dataset, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
    w.iter_mut().for_each(|t| *t *= signal / norm);
    let data = sample_logistic(&w, n, &mut rng, id_offset);
    (data, w)
}

/// Draws `n` more examples from a fixed logistic model `w`.
pub fn sample_logistic_with(w: &[f64], n: usize, seed: u64, id_offset: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_logistic(w, n, &mut rng, id_offset)
}

fn sample_logistic(w: &[f64], n: usize, rng: &mut ChaCha8Rng, id_offset: u64) -> Dataset {
    let d = w.len();
    let examples = (0..n)
        .map(|i| {
            let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            x[d - 1] = 1.0;
            let m: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let y = usize::from(rng.gen::<f64>() < sigmoid(m));
            Example::new(id_offset + i as u64, x, y)
        })
        .collect();
    Dataset::new(examples, 2, d).expect("synthetic logistic data is valid")
}
