// SPDX-License-Identifier: MIT OR Apache-2.0

//! TRAK on a small MLP, scored by LDS for growing ensemble sizes.
//!
//! cargo run --release --example trak_mlp_lds -- [n] [members] [k] [subsets]

use std::time::Instant;

use trak::attribution::{featurize_ensemble, trak_ensemble, AttributionMatrix, Provenance};
use trak::evaluation::{lds, produce_runs, Retrainer};
use trak::linalg::{DenseMatrix, ProjectionSpec};
use trak::models::synthetic::gaussian_blobs_split;
use trak::models::{Activation, ModelSpec};
use trak::training::{build_ensemble, TrainConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> trak::Result<()> {
    let (n, members, k, subsets) = (arg(1, 500), arg(2, 20), arg(3, 128), arg(4, 64));
    let (d, hidden, n_test) = (10, 16, 100);
    let (train, test) = gaussian_blobs_split(n, n_test, d, 2, 1.5, 11);
    let spec = ModelSpec::mlp(&[d, hidden, 2], Activation::Tanh);
    let cfg = TrainConfig::sgd(100, 0.05, 25, 0).with_ridge(1e-3);
    println!("n = {n}, p = {}, k = {k}", spec.param_count());

    let start = Instant::now();
    let retrainer = Retrainer::new(spec.clone(), cfg.clone());
    let runs = produce_runs(&retrainer, &train, &test, 0.5, subsets, 3, 1)?;
    println!("{subsets} subset runs x 3 reps in {:.1?}", start.elapsed());

    let start = Instant::now();
    let checkpoints = build_ensemble(&spec, &train, 0.5, members, &cfg, 2)?;
    let proj = ProjectionSpec::new(3, spec.param_count(), k);
    let bundles = featurize_ensemble(&checkpoints, &spec, &train, &test, &proj, None, false)?;
    println!("ensemble of {members} featurized in {:.1?}", start.elapsed());

    let mut m = 1;
    while m <= members {
        let report = lds(&trak_ensemble(&bundles[..m])?, &runs)?;
        println!(
            "M = {m:3}: LDS {:.3} [{:.3}, {:.3}]",
            report.mean_lds, report.ci_low, report.ci_high
        );
        m = if m == members { m + 1 } else { (m * 2).min(members) };
    }

    let noise = DenseMatrix::from_fn(n_test, n, |t, i| ((t * 7919 + i * 104_729) as f64).sin());
    let control = AttributionMatrix::new(noise, "noise", Provenance::default())?;
    println!("noise control: LDS {:.3}", lds(&control, &runs)?.mean_lds);
    Ok(())
}
