// SPDX-License-Identifier: MIT OR Apache-2.0

//! Removal budgets that flip test predictions, attribution order against
//! random order.
//!
//! cargo run --release --example brittleness -- [targets]

use trak::attribution::{featurize_ensemble, trak_ensemble};
use trak::evaluation::{brittleness_with_order, random_order, removal_order, sign_test_p, Retrainer};
use trak::linalg::ProjectionSpec;
use trak::models::synthetic::gaussian_blobs_split;
use trak::models::{Activation, ModelSpec};
use trak::training::{build_ensemble, TrainConfig};
use trak::Error;

fn main() -> trak::Result<()> {
    let want: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let (train, test) = gaussian_blobs_split(300, 60, 6, 2, 1.5, 7);
    let spec = ModelSpec::mlp(&[6, 12, 2], Activation::Tanh);
    let cfg = TrainConfig::sgd(60, 0.05, 25, 0).with_ridge(1e-3);
    let retrainer = Retrainer::new(spec.clone(), cfg.clone());
    let ensemble = build_ensemble(&spec, &train, 0.5, 10, &cfg, 2)?;
    let proj = ProjectionSpec::new(3, spec.param_count(), 64);
    let t = trak_ensemble(&featurize_ensemble(
        &ensemble, &spec, &train, &test, &proj, None, false,
    )?)?;

    let budgets = [5, 10, 20, 40, 80];
    let (mut wins, mut trials, mut done) = (0, 0, 0);
    println!("target  attribution  random");
    for ti in 0..test.len() {
        if done == want {
            break;
        }
        let target = test.get(ti);
        let run = |order: &[usize]| brittleness_with_order(order, &train, &retrainer, target, &budgets, 3, 9);
        let ours = match run(&removal_order(t.row(ti))) {
            Ok(r) => r.flip_budget,
            Err(Error::InvalidArgument(_)) => continue,
            Err(e) => return Err(e),
        };
        let rand = run(&random_order(train.len(), ti as u64))?.flip_budget;
        let key = |b: Option<usize>| b.unwrap_or(usize::MAX);
        if key(ours) != key(rand) {
            trials += 1;
            wins += usize::from(key(ours) < key(rand));
        }
        let show = |b: Option<usize>| b.map_or("none".to_string(), |v| v.to_string());
        println!("{ti:6}  {:>11}  {:>6}", show(ours), show(rand));
        done += 1;
    }
    println!(
        "attribution order flips first in {wins}/{trials} untied pairs, sign test p = {:.3e}",
        sign_test_p(wins, trials)
    );
    Ok(())
}
