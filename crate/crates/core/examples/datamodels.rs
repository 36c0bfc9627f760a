// SPDX-License-Identifier: MIT OR Apache-2.0

//! Datamodel regression and empirical influence on a planted linear family
//! with one sparse and one dense output.
//!
//! cargo run --release --example datamodels -- [n] [runs_per_example]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use trak::attribution::{datamodel_fit, datamodel_fit_with, empirical_influence, LassoConfig};
use trak::evaluation::{spearman, SubsetRun};
use trak::training::SubsetMask;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> trak::Result<()> {
    let (n, per) = (arg(1, 50), arg(2, 10));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let beta: Vec<f64> = (0..n)
        .map(|i| {
            if i % 10 == 0 {
                StandardNormal.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let dense: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let runs = (0..per * n)
        .map(|_| {
            let mask = SubsetMask::from_bools((0..n).map(|_| rng.gen_bool(0.5)).collect());
            let y: Vec<f64> = [&beta, &dense]
                .iter()
                .map(|b| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    mask.indices().iter().map(|&i| b[i]).sum::<f64>() + 0.05 * noise
                })
                .collect();
            SubsetRun::new(mask, vec![0], y)
        })
        .collect::<trak::Result<Vec<_>>>()?;

    let ols = datamodel_fit(&runs, 0, 0.0)?;
    let err = ols
        .weights
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{} runs, l1 = 0: max |w - beta| = {err:.4}", runs.len());

    for l1 in [0.01, 0.05, 0.2] {
        let fit = datamodel_fit_with(&runs, 0, &LassoConfig::new(l1))?;
        let nz = fit.weights.iter().filter(|w| **w != 0.0).count();
        println!("l1 = {l1}: {nz} non-zero weights (true support {})", n / 10);
    }

    let ei: Vec<f64> = empirical_influence(&runs, 1)?
        .into_iter()
        .map(|v| v.unwrap_or(0.0))
        .collect();
    let dm = datamodel_fit(&runs, 1, 0.0)?;
    println!(
        "dense output: spearman(empirical influence, datamodel) = {:.3}",
        spearman(&ei, &dm.weights)?.rho
    );
    Ok(())
}
