// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk feature bundles: three store files plus a JSON manifest.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/train.trakfs   n × k training features
//! <dir>/test.trakfs    n_test × k test features
//! <dir>/q.trakfs       n × 1 values of 1 − p
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::{self, StoreKind};
use crate::attribution::FeatureBundle;
use crate::error::{check_len, Error, Result};
use crate::linalg::{DenseMatrix, ProjectionSpec};
use crate::training::{CheckpointRecord, SubsetMask};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.trakfs";
pub const TEST_FILE: &str = "test.trakfs";
pub const Q_FILE: &str = "q.trakfs";

// Largest and smallest f32 strictly inside (0, 1).
const Q_MAX_F32: f32 = 1.0 - f32::EPSILON / 2.0;
const Q_MIN_F32: f32 = f32::MIN_POSITIVE;

/// JSON sidecar describing one ensemble member's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model_index: usize,
    pub mask: SubsetMask,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub projection: ProjectionSpec,
    pub dataset_hash: String,
    #[serde(default)]
    pub spec_hash: String,
    pub epoch: usize,
    pub n_test: usize,
    /// SHA-256 of each payload file by name. Empty for external dumps.
    #[serde(default)]
    pub payload_sha256: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn for_bundle(bundle: &FeatureBundle, checkpoint: &CheckpointRecord, alpha: f64) -> Self {
        RunManifest {
            model_index: bundle.model_index,
            mask: bundle.mask.clone(),
            seeds: vec![checkpoint.seed],
            alpha,
            projection: bundle.projection.clone(),
            dataset_hash: bundle.dataset_hash.clone(),
            spec_hash: bundle.spec_hash.clone(),
            epoch: checkpoint.epoch,
            n_test: bundle.n_test(),
            payload_sha256: BTreeMap::new(),
        }
    }

    pub fn n_train(&self) -> usize {
        self.mask.len()
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Rounds `q` to `f32`, keeping it strictly inside `(0, 1)`.
fn q_for_disk(q: f64) -> f64 {
    f64::from((q as f32).clamp(Q_MIN_F32, Q_MAX_F32))
}

/// Writes the bundle's payloads and manifest into `dir`. Returns the manifest
/// as written, payload hashes filled in.
pub fn write_features(dir: &Path, bundle: &FeatureBundle, manifest: &RunManifest) -> Result<RunManifest> {
    bundle.validate()?;
    check_manifest_against(manifest, bundle.n_train(), bundle.n_test(), bundle.k())?;
    if manifest.dataset_hash != bundle.dataset_hash {
        return Err(Error::HashMismatch {
            what: "manifest dataset",
            expected: bundle.dataset_hash.clone(),
            found: manifest.dataset_hash.clone(),
        });
    }
    fs::create_dir_all(dir)?;
    let q = DenseMatrix::from_fn(bundle.n_train(), 1, |i, _| q_for_disk(bundle.q_diag[i]));
    let mut m = manifest.clone();
    m.payload_sha256 = BTreeMap::from([
        (
            TRAIN_FILE.to_string(),
            store::write_matrix(&dir.join(TRAIN_FILE), &bundle.train_features, StoreKind::TrainFeatures)?,
        ),
        (
            TEST_FILE.to_string(),
            store::write_matrix(&dir.join(TEST_FILE), &bundle.test_features, StoreKind::TestFeatures)?,
        ),
        (
            Q_FILE.to_string(),
            store::write_matrix(&dir.join(Q_FILE), &q, StoreKind::QDiag)?,
        ),
    ]);
    let json = serde_json::to_vec_pretty(&m)?;
    store::atomic_write(&dir.join(MANIFEST_FILE), &json)?;
    Ok(m)
}

fn check_manifest_against(m: &RunManifest, n: usize, n_test: usize, k: usize) -> Result<()> {
    check_len("manifest n (mask length)", m.n_train(), n)?;
    check_len("manifest n_test", m.n_test, n_test)?;
    check_len("manifest projection output_dim", m.projection.output_dim, k)?;
    Ok(())
}

/// Reads a bundle written by [`write_features`], verifying payload hashes and,
/// if given, the dataset hash.
pub fn read_features(dir: &Path, expected_dataset_hash: Option<&str>) -> Result<FeatureBundle> {
    let manifest = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    if let Some(h) = expected_dataset_hash {
        if manifest.dataset_hash != h {
            return Err(Error::HashMismatch {
                what: "feature bundle dataset",
                expected: h.to_string(),
                found: manifest.dataset_hash,
            });
        }
    }
    import_external_gradients(dir, &manifest)
}

/// Loads the store files in `dir` and checks them against `manifest`:
/// shapes, payload hashes where recorded, and `q` strictly inside `(0, 1)`.
pub fn import_external_gradients(dir: &Path, manifest: &RunManifest) -> Result<FeatureBundle> {
    for (name, want) in &manifest.payload_sha256 {
        let got = store::file_sha256(&dir.join(name))?;
        if &got != want {
            return Err(Error::HashMismatch {
                what: "payload",
                expected: want.clone(),
                found: got,
            });
        }
    }
    let train_features = store::read_matrix(&dir.join(TRAIN_FILE), StoreKind::TrainFeatures)?;
    let test_features = store::read_matrix(&dir.join(TEST_FILE), StoreKind::TestFeatures)?;
    let q = store::read_matrix(&dir.join(Q_FILE), StoreKind::QDiag)?;
    check_len("q column count", 1, q.cols())?;
    check_len("q length", train_features.rows(), q.rows())?;
    check_manifest_against(
        manifest,
        train_features.rows(),
        test_features.rows(),
        train_features.cols(),
    )?;
    let bundle = FeatureBundle {
        model_index: manifest.model_index,
        train_features,
        test_features,
        q_diag: q.into_vec(),
        mask: manifest.mask.clone(),
        projection: manifest.projection.clone(),
        dataset_hash: manifest.dataset_hash.clone(),
        spec_hash: manifest.spec_hash.clone(),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Directory name of member `m` under an ensemble feature directory.
pub fn member_dir(m: usize) -> String {
    format!("member_{m:04}")
}

/// Reads every `member_*` bundle under `root` in index order.
pub fn read_feature_dir(root: &Path, expected_dataset_hash: Option<&str>) -> Result<Vec<FeatureBundle>> {
    let mut dirs: Vec<_> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("member_") && e.path().is_dir())
        .map(|e| e.path())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Format(format!(
            "no member_* directories under {}",
            root.display()
        )));
    }
    dirs.iter().map(|d| read_features(d, expected_dataset_hash)).collect()
}
