// SPDX-License-Identifier: MIT OR Apache-2.0

//! LDS of the estimator with individual terms switched off, and against
//! projection dimension.
//!
//! cargo run --release --example ablations

use trak::attribution::{featurize_ensemble, trak_ensemble, trak_ensemble_with, Averaging, TrakOptions};
use trak::evaluation::{lds, produce_runs, Retrainer};
use trak::linalg::ProjectionSpec;
use trak::models::synthetic::gaussian_blobs_split;
use trak::models::{Activation, ModelSpec};
use trak::training::{build_ensemble, TrainConfig};

fn main() -> trak::Result<()> {
    let (train, test) = gaussian_blobs_split(500, 100, 10, 2, 1.5, 11);
    let spec = ModelSpec::mlp(&[10, 16, 2], Activation::Tanh);
    let cfg = TrainConfig::sgd(100, 0.05, 25, 0).with_ridge(1e-3);
    let runs = produce_runs(&Retrainer::new(spec.clone(), cfg.clone()), &train, &test, 0.5, 64, 3, 1)?;
    let ensemble = build_ensemble(&spec, &train, 0.5, 20, &cfg, 2)?;

    let proj = ProjectionSpec::new(3, spec.param_count(), 128);
    let bundles = featurize_ensemble(&ensemble, &spec, &train, &test, &proj, None, false)?;
    let full = TrakOptions::default();
    let variants = [
        ("full", full),
        (
            "no reweighting",
            TrakOptions {
                reweight: false,
                ..full
            },
        ),
        ("no q", TrakOptions { use_q: false, ..full }),
        (
            "averaging in",
            TrakOptions {
                averaging: Averaging::In,
                ..full
            },
        ),
        (
            "with r",
            TrakOptions {
                r_weighting: true,
                ..full
            },
        ),
        ("with leverage", TrakOptions { leverage: true, ..full }),
    ];
    for (name, opts) in variants {
        let r = lds(&trak_ensemble_with(&bundles, &opts)?, &runs)?;
        println!("{name:16} LDS {:.3} [{:.3}, {:.3}]", r.mean_lds, r.ci_low, r.ci_high);
    }

    for k in [16, 32, 64, 128, 256] {
        let proj = ProjectionSpec::new(3, spec.param_count(), k);
        let bundles = featurize_ensemble(&ensemble, &spec, &train, &test, &proj, None, false)?;
        println!("k = {k:4}: LDS {:.3}", lds(&trak_ensemble(&bundles)?, &runs)?.mean_lds);
    }
    Ok(())
}
