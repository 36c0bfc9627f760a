// SPDX-License-Identifier: MIT OR Apache-2.0

//! LDS of every estimator on the same small MLP task.
//!
//! cargo run --release --example baselines

use trak::attribution::{
    featurize_ensemble, gas, influence_function, representation_similarity, tracin, trak_ensemble, AttributionMatrix,
    Damping, HessianMode,
};
use trak::evaluation::{lds, produce_runs, Retrainer};
use trak::linalg::ProjectionSpec;
use trak::models::synthetic::gaussian_blobs_split;
use trak::models::{Activation, ModelSpec};
use trak::training::{build_ensemble, train, SubsetMask, TrainConfig};

fn main() -> trak::Result<()> {
    let (train_set, test) = gaussian_blobs_split(300, 50, 6, 2, 1.5, 5);
    let spec = ModelSpec::mlp(&[6, 12, 2], Activation::Tanh);
    let cfg = TrainConfig::sgd(60, 0.05, 25, 0).with_ridge(1e-3);
    let runs = produce_runs(
        &Retrainer::new(spec.clone(), cfg.clone()),
        &train_set,
        &test,
        0.5,
        48,
        2,
        1,
    )?;
    let proj = ProjectionSpec::new(3, spec.param_count(), 64);

    let ensemble = build_ensemble(&spec, &train_set, 0.5, 10, &cfg, 2)?;
    let bundles = featurize_ensemble(&ensemble, &spec, &train_set, &test, &proj, None, false)?;
    let path = train(
        &spec,
        &train_set,
        &SubsetMask::full(train_set.len()),
        &cfg.clone().with_checkpoints(vec![15, 30, 45, 60]),
    )?;
    let last = path.last().expect("checkpoints");
    let lrs = vec![cfg.lr; path.len()];

    let estimators: Vec<(&str, AttributionMatrix)> = vec![
        ("trak (M = 10)", trak_ensemble(&bundles)?),
        ("trak (M = 1)", trak_ensemble(&bundles[..1])?),
        ("tracin", tracin(&path, &lrs, &spec, &train_set, &test, Some(&proj))?),
        ("gas", gas(&path, &lrs, &spec, &train_set, &test, Some(&proj))?),
        (
            "representation similarity",
            representation_similarity(last, &spec, &train_set, &test)?,
        ),
        (
            "influence function (GGN)",
            influence_function(
                &spec,
                &last.params,
                &train_set,
                &test,
                HessianMode::Ggn,
                Damping::Relative(1e-2),
            )?,
        ),
    ];
    for (name, t) in &estimators {
        let r = lds(t, &runs)?;
        println!("{name:28} LDS {:.3} [{:.3}, {:.3}]", r.mean_lds, r.ci_low, r.ci_high);
    }
    Ok(())
}
