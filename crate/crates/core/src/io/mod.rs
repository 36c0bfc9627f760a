// SPDX-License-Identifier: MIT OR Apache-2.0

//! Persistence: binary feature and score stores, JSON manifests, and the
//! dataset text format.

mod artifacts;
mod bundle;
pub mod store;
mod text;

pub use artifacts::{
    checkpoint_file_name, read_checkpoint, read_checkpoint_dir, read_json, read_scores, scores_meta_path,
    write_checkpoint, write_json, write_scores, CheckpointFile, RunsFile, ScoresMeta,
};
pub use bundle::{
    import_external_gradients, member_dir, read_feature_dir, read_features, write_features, RunManifest, MANIFEST_FILE,
    Q_FILE, TEST_FILE, TRAIN_FILE,
};
pub use store::{StoreHeader, StoreKind};
pub use text::{format_dataset, parse_dataset, read_dataset, write_dataset};
