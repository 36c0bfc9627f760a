// SPDX-License-Identifier: MIT OR Apache-2.0

//! Writes feature stores to disk, reads them back, and scores from the
//! re-imported bundle.
//!
//! cargo run --release --example feature_store_io -- [out_dir]

use std::path::PathBuf;

use trak::attribution::{featurize, trak_single};
use trak::io::{self, RunManifest};
use trak::linalg::ProjectionSpec;
use trak::models::synthetic::gaussian_blobs_split;
use trak::models::{Activation, ModelSpec};
use trak::training::{build_ensemble, TrainConfig};

fn main() -> trak::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("trak_feature_store_io"));
    let (train, test) = gaussian_blobs_split(200, 20, 4, 2, 2.0, 3);
    let spec = ModelSpec::mlp(&[4, 8, 2], Activation::Tanh);
    let cfg = TrainConfig::sgd(30, 0.05, 20, 0);
    let member = build_ensemble(&spec, &train, 0.5, 1, &cfg, 1)?.remove(0);
    let proj = ProjectionSpec::new(3, spec.param_count(), 32);
    let bundle = featurize(&member, &spec, &train, &test, &proj, None)?;

    let manifest = io::write_features(&dir, &bundle, &RunManifest::for_bundle(&bundle, &member, 0.5))?;
    for (name, sha) in &manifest.payload_sha256 {
        let len = std::fs::metadata(dir.join(name))?.len();
        println!("{name:14} {len:7} bytes  sha256 {}", &sha[..16]);
    }

    let back = io::read_features(&dir, Some(&train.content_hash()))?;
    let (a, b) = (trak_single(&bundle)?, trak_single(&back)?);
    let diff = a.scores.max_rel_diff(&b.scores, 1e-6);
    println!("scores from the re-imported bundle differ by at most {diff:.2e} (f32 storage)");

    let external = io::import_external_gradients(&dir, &manifest)?;
    println!(
        "external import: {} train rows, k = {}",
        external.n_train(),
        external.k()
    );
    Ok(())
}
