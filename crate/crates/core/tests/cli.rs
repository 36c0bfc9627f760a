// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end runs of the `trak` binary on the toy fixture.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy").join(name)
}

fn trak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trak"))
        .arg("--config")
        .arg(fixture("config.toml"))
        .args(args)
        .output()
        .expect("spawn trak")
}

fn ok(args: &[&str]) -> String {
    let out = trak(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Workspace {
    dir: TempDir,
    train: String,
    test: String,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
            train: fixture("train.csv").display().to_string(),
            test: fixture("test.csv").display().to_string(),
        }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn checkpoints(&self) -> String {
        let out = self.path("ck");
        ok(&["train-ensemble", "--train", &self.train, "--out", &out]);
        out
    }

    fn features(&self, name: &str) -> String {
        let ck = self.checkpoints();
        let out = self.path(name);
        ok(&[
            "featurize",
            "--train",
            &self.train,
            "--test",
            &self.test,
            "--checkpoints",
            &ck,
            "--out",
            &out,
        ]);
        out
    }

    fn runs(&self) -> String {
        let out = self.path("runs.json");
        ok(&["make-runs", "--train", &self.train, "--test", &self.test, "--out", &out]);
        out
    }

    fn trak_scores(&self, features: &str) -> String {
        let out = self.path("trak.trakfs");
        ok(&[
            "score",
            "--method",
            "trak",
            "--train",
            &self.train,
            "--test",
            &self.test,
            "--features",
            features,
            "--out",
            &out,
        ]);
        out
    }
}

#[test]
fn score_matches_golden_hash() {
    let ws = Workspace::new();
    let features = ws.features("f");
    let scores = ws.trak_scores(&features);
    let got = trak::io::store::file_sha256(Path::new(&scores)).unwrap();
    let golden = std::fs::read_to_string(fixture("golden_trak.sha256")).unwrap();
    assert_eq!(got, golden.trim());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{scores}.json")).unwrap()).unwrap();
    assert_eq!(meta["payload_sha256"], got);
    assert_eq!(meta["n_train"], 60);
}

#[test]
fn featurize_is_byte_identical() {
    let ws = Workspace::new();
    let a = ws.features("a");
    let b = ws.path("b");
    ok(&[
        "featurize",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--checkpoints",
        &ws.path("ck"),
        "--out",
        &b,
    ]);
    for member in std::fs::read_dir(&a).unwrap() {
        let member = member.unwrap().file_name();
        for file in std::fs::read_dir(Path::new(&a).join(&member)).unwrap() {
            let file = file.unwrap().file_name();
            let left = std::fs::read(Path::new(&a).join(&member).join(&file)).unwrap();
            let right = std::fs::read(Path::new(&b).join(&member).join(&file)).unwrap();
            assert!(left == right, "{member:?}/{file:?} differs");
        }
    }
}

#[test]
fn evaluation_commands_run() {
    let ws = Workspace::new();
    let features = ws.features("f");
    let runs = ws.runs();
    let scores = ws.trak_scores(&features);

    let report = ok(&["lds", "--scores", &scores, "--runs", &runs]);
    assert!(report.starts_with("metric,value\nmean_lds,"), "{report}");

    let table = ws.path("ablate.csv");
    let plot = ws.path("plot.dat");
    ok(&[
        "ablate",
        "--features",
        &features,
        "--runs",
        &runs,
        "--out",
        &table,
        "--emit-plot-data",
        &plot,
    ]);
    let table = std::fs::read_to_string(table).unwrap();
    for variant in trak::cli::ablation_variants() {
        assert!(table.contains(variant.0), "missing {} in\n{table}", variant.0);
    }
    let plot = std::fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("# wall_seconds mean_lds"));
    assert!(plot.lines().filter(|l| !l.starts_with('#')).count() >= 2);

    let cf = ok(&[
        "counterfactual",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--scores",
        &scores,
        "--k",
        "5",
        "--reps",
        "1",
    ]);
    assert!(!cf.is_empty());
    let br = ok(&[
        "brittleness",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--scores",
        &scores,
        "--targets",
        "0,1",
        "--budgets",
        "2,4",
        "--reps",
        "1",
    ]);
    assert!(!br.is_empty());

    for method in ["datamodel", "emp-inf"] {
        let out = ws.path(&format!("{method}.trakfs"));
        ok(&[
            "score", "--method", method, "--train", &ws.train, "--test", &ws.test, "--runs", &runs, "--out", &out,
        ]);
    }
    for method in ["tracin", "gas", "repsim"] {
        let out = ws.path(&format!("{method}.trakfs"));
        ok(&[
            "score",
            "--method",
            method,
            "--train",
            &ws.train,
            "--test",
            &ws.test,
            "--checkpoints",
            &ws.path("ck"),
            "--out",
            &out,
        ]);
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(trak(&[]).status.code(), Some(1));
    let ws = Workspace::new();
    let out = trak(&[
        "score",
        "--method",
        "bogus",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--out",
        &ws.path("s"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    // Method needs an input that was not given.
    let out = trak(&[
        "score",
        "--method",
        "trak",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--out",
        &ws.path("s"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(trak(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let ws = Workspace::new();
    let out = trak(&[
        "train-ensemble",
        "--train",
        &ws.path("missing.csv"),
        "--out",
        &ws.path("ck"),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let runs = ws.path("one_run.json");
    ok(&[
        "make-runs",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--out",
        &runs,
        "--m",
        "1",
    ]);
    let features = ws.features("f");
    let scores = ws.trak_scores(&features);
    let out = trak(&["lds", "--scores", &scores, "--runs", &runs]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2"));
}

#[test]
fn cross_wired_dataset_rejected() {
    let ws = Workspace::new();
    let features = ws.features("f");
    let (other_train, other_test) = (ws.path("other_train.csv"), ws.path("other_test.csv"));
    ok(&[
        "gen-data",
        "--n",
        "60",
        "--n-test",
        "10",
        "--d",
        "2",
        "--separation",
        "1.0",
        "--out-train",
        &other_train,
        "--out-test",
        &other_test,
    ]);
    let out = trak(&[
        "score",
        "--method",
        "trak",
        "--train",
        &other_train,
        "--test",
        &ws.test,
        "--features",
        &features,
        "--out",
        &ws.path("s.trakfs"),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tampered_store_rejected() {
    let ws = Workspace::new();
    let features = ws.features("f");
    let store = Path::new(&features).join("member_0000").join("train.trakfs");
    let mut bytes = std::fs::read(&store).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    std::fs::write(&store, bytes).unwrap();
    let out = trak(&[
        "score",
        "--method",
        "trak",
        "--train",
        &ws.train,
        "--test",
        &ws.test,
        "--features",
        &features,
        "--out",
        &ws.path("s.trakfs"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
