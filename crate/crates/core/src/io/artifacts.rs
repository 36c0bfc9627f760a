// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON artifacts (checkpoints, subset runs) and score matrix files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::store::{self, StoreKind};
use crate::attribution::{AttributionMatrix, Provenance};
use crate::error::{check_len, Error, Result};
use crate::evaluation::SubsetRun;
use crate::models::ModelSpec;
use crate::training::CheckpointRecord;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    store::atomic_write(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn require_hash(what: &'static str, expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::HashMismatch {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

/// A checkpoint together with the model and data it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub spec: ModelSpec,
    pub spec_hash: String,
    pub dataset_hash: String,
    pub alpha: f64,
    pub record: CheckpointRecord,
}

impl CheckpointFile {
    pub fn new(spec: &ModelSpec, dataset_hash: String, alpha: f64, record: CheckpointRecord) -> Self {
        CheckpointFile {
            spec: spec.clone(),
            spec_hash: spec.content_hash(),
            dataset_hash,
            alpha,
            record,
        }
    }

    /// Checks internal consistency and, if given, the dataset hash.
    pub fn verify(&self, expected_dataset_hash: Option<&str>) -> Result<()> {
        require_hash("checkpoint spec", &self.spec.content_hash(), &self.spec_hash)?;
        if let Some(h) = expected_dataset_hash {
            require_hash("checkpoint dataset", h, &self.dataset_hash)?;
        }
        self.spec.validate()?;
        self.record.params.check(&self.spec)
    }
}

pub fn checkpoint_file_name(record: &CheckpointRecord) -> String {
    format!("ckpt_{:04}.json", record.model_index)
}

pub fn write_checkpoint(path: &Path, ck: &CheckpointFile) -> Result<()> {
    ck.verify(None)?;
    write_json(path, ck)
}

pub fn read_checkpoint(path: &Path, expected_dataset_hash: Option<&str>) -> Result<CheckpointFile> {
    let ck: CheckpointFile = read_json(path)?;
    ck.verify(expected_dataset_hash)?;
    Ok(ck)
}

/// All `ckpt_*.json` files under `dir`, sorted by model index.
pub fn read_checkpoint_dir(dir: &Path, expected_dataset_hash: Option<&str>) -> Result<Vec<CheckpointFile>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy())
                .is_some_and(|n| n.starts_with("ckpt_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Format(format!("no ckpt_*.json files under {}", dir.display())));
    }
    let mut cks = paths
        .iter()
        .map(|p| read_checkpoint(p, expected_dataset_hash))
        .collect::<Result<Vec<_>>>()?;
    cks.sort_by_key(|c| c.record.model_index);
    if cks.windows(2).any(|w| w[0].spec != w[1].spec) {
        return Err(Error::invalid("checkpoints in one directory use different model specs"));
    }
    Ok(cks)
}

/// Subset-retraining runs with the hashes of the data they were measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsFile {
    pub train_hash: String,
    pub test_hash: String,
    pub spec_hash: String,
    pub alpha: f64,
    pub reps: usize,
    pub runs: Vec<SubsetRun>,
}

impl RunsFile {
    pub fn verify(&self, train_hash: Option<&str>, test_hash: Option<&str>) -> Result<()> {
        if let Some(h) = train_hash {
            require_hash("runs training set", h, &self.train_hash)?;
        }
        if let Some(h) = test_hash {
            require_hash("runs test set", h, &self.test_hash)?;
        }
        Ok(())
    }
}

/// Metadata stored beside a score matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresMeta {
    pub method: String,
    pub provenance: Provenance,
    pub n_test: usize,
    pub n_train: usize,
    pub payload_sha256: String,
}

/// `<scores path>.json`.
pub fn scores_meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the score payload and its sidecar; returns the payload SHA-256.
pub fn write_scores(path: &Path, t: &AttributionMatrix) -> Result<String> {
    let sha = store::write_matrix(path, &t.scores, StoreKind::Scores)?;
    let meta = ScoresMeta {
        method: t.method.clone(),
        provenance: t.provenance.clone(),
        n_test: t.n_test(),
        n_train: t.n_train(),
        payload_sha256: sha.clone(),
    };
    write_json(&scores_meta_path(path), &meta)?;
    Ok(sha)
}

pub fn read_scores(path: &Path) -> Result<AttributionMatrix> {
    let meta: ScoresMeta = read_json(&scores_meta_path(path))?;
    let bytes = fs::read(path)?;
    require_hash("score payload", &meta.payload_sha256, &store::sha256_hex(&bytes))?;
    let scores = store::decode_matrix(&bytes, StoreKind::Scores)?;
    check_len("score rows", meta.n_test, scores.rows())?;
    check_len("score cols", meta.n_train, scores.cols())?;
    AttributionMatrix::new(scores, meta.method, meta.provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::models::{ModelParams, ModelSpec};
    use crate::training::SubsetMask;

    #[test]
    fn scores_round_trip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.trakfs");
        let t = AttributionMatrix::new(
            DenseMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.25),
            "trak",
            Provenance {
                checkpoint_ids: vec![0, 1],
                spec_hash: "s".into(),
                dataset_hash: "d".into(),
            },
        )
        .unwrap();
        write_scores(&p, &t).unwrap();
        assert_eq!(read_scores(&p).unwrap(), t);
        fs::write(&p, b"junk").unwrap();
        assert!(matches!(read_scores(&p), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn checkpoint_hashes_checked() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ModelSpec::logreg(3, 2);
        let rec = CheckpointRecord {
            params: ModelParams::new(&spec, vec![0.1, 0.2, 0.3]).unwrap(),
            mask: SubsetMask::full(5),
            seed: 2,
            epoch: 1,
            model_index: 0,
            run_index: 0,
        };
        let ck = CheckpointFile::new(&spec, "abc".into(), 0.5, rec);
        let p = dir.path().join(checkpoint_file_name(&ck.record));
        write_checkpoint(&p, &ck).unwrap();
        assert_eq!(read_checkpoint(&p, Some("abc")).unwrap(), ck);
        assert!(read_checkpoint(&p, Some("xyz")).is_err());
        assert_eq!(read_checkpoint_dir(dir.path(), None).unwrap().len(), 1);
        let mut bad = ck.clone();
        bad.spec_hash = "0".into();
        assert!(write_checkpoint(&p, &bad).is_err());
    }
}
