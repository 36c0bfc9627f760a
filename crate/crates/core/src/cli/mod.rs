// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 numerical failure.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{
    Config, EnsembleSection, InfluenceSection, LassoSection, ModelSection, ProjectionSection, RunsSection, TrainSection,
};

use crate::attribution::{
    cross_validate_threshold, datamodel_matrix, empirical_influence_matrix, featurize_ensemble, gas,
    influence_function, newton_loo, representation_similarity, split_runs, tracin, trak_ensemble_with,
    AttributionMatrix, Averaging, FeatureBundle, ThresholdMode, TrakOptions,
};
use crate::error::Error;
use crate::evaluation::{
    brittleness_with_order, counterfactual_removal, lds_with, produce_runs, random_order, removal_order, sign_test_p,
    LdsOptions, Retrainer, SubsetRun,
};
use crate::io::{self, CheckpointFile, RunManifest, RunsFile};
use crate::linalg::ProjectionSpec;
use crate::models::synthetic::{gaussian_blobs_split, logistic_family, sample_logistic_with};
use crate::models::{Dataset, ModelSpec};
use crate::seed;
use crate::training::{build_ensemble, CheckpointRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "trak",
    version,
    about = "Training-data attribution and linear datamodeling score evaluation"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic train/test pair in the dataset text format.
    GenData(GenDataArgs),
    /// Train an ensemble on random subsets and write checkpoints.
    TrainEnsemble(TrainEnsembleArgs),
    /// Project output gradients of every checkpoint into feature stores.
    Featurize(FeaturizeArgs),
    /// Compute an attribution matrix.
    Score(ScoreArgs),
    /// Retrain on random subsets and record test outputs.
    MakeRuns(MakeRunsArgs),
    /// Linear datamodeling score of a score matrix against subset runs.
    Lds(LdsArgs),
    /// Smallest removal budget that flips each target's prediction.
    Brittleness(BrittlenessArgs),
    /// Output drop after removing each target's top-k training examples.
    Counterfactual(CounterfactualArgs),
    /// LDS of the estimator with individual terms switched off.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Blobs,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Trak,
    Tracin,
    Gas,
    Repsim,
    If,
    NewtonLoo,
    Datamodel,
    EmpInf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training set (text format).
    #[arg(long)]
    pub train: PathBuf,
    /// Test set (text format).
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "blobs")]
    pub family: Family,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub n_test: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Class count (blobs only; logistic is binary).
    #[arg(long, default_value_t = 2)]
    pub c: usize,
    /// Blob separation, or the norm of the logistic weight vector.
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_test: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainEnsembleArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Output directory for `ckpt_*.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoints: PathBuf,
    /// Output directory; one `member_*` subdirectory per checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub data: DataArgs,
    /// Feature directory (trak).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Checkpoint directory (tracin, gas, repsim, if, newton-loo).
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Subset runs (datamodel, emp-inf, and threshold cross-validation).
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// Output score file; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeRunsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LdsArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub runs: PathBuf,
    /// CSV report; printed to stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BrittlenessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub scores: PathBuf,
    /// Test positions to examine.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Also run a random removal order and report a paired sign test.
    #[arg(long)]
    pub compare_random: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Remove random examples instead of the top-scored ones.
    #[arg(long)]
    pub random: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Two-column `wall_seconds mean_lds` file over growing ensemble sizes.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Run(e) if e.is_numerical() => EXIT_NUMERICAL,
            Failure::Run(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::GenData(a) => gen_data(&cfg, a),
        Command::TrainEnsemble(a) => train_ensemble(&cfg, a),
        Command::Featurize(a) => featurize_cmd(&cfg, a),
        Command::Score(a) => score(&cfg, a),
        Command::MakeRuns(a) => make_runs(&cfg, a),
        Command::Lds(a) => lds_cmd(&cfg, a),
        Command::Brittleness(a) => brittleness_cmd(&cfg, a),
        Command::Counterfactual(a) => counterfactual_cmd(&cfg, a),
        Command::Ablate(a) => ablate(&cfg, a),
    }
}

fn load_pair(d: &DataArgs) -> CliResult<(Dataset, Dataset)> {
    let train = io::read_dataset(&d.train)?;
    let test = io::read_dataset(&d.test)?;
    if train.feature_dim() != test.feature_dim() || train.class_count() != test.class_count() {
        return Err(Error::invalid("train and test sets differ in feature_dim or class_count").into());
    }
    Ok((train, test))
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => io::store::atomic_write(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn gen_data(cfg: &Config, a: &GenDataArgs) -> CliResult<()> {
    let (train, test) = match a.family {
        Family::Blobs => gaussian_blobs_split(a.n, a.n_test, a.d, a.c, a.separation, cfg.seed),
        Family::Logistic => {
            if a.c != 2 {
                return Err(usage("the logistic family is binary; use --c 2"));
            }
            let (train, w) = logistic_family(a.n, a.d, a.separation, cfg.seed, 0);
            let test = sample_logistic_with(&w, a.n_test, seed::derive(cfg.seed, seed::TAG_SHUFFLE, 1), a.n as u64);
            (train, test)
        }
    };
    io::write_dataset(&a.out_train, &train)?;
    io::write_dataset(&a.out_test, &test)?;
    println!("wrote {} train and {} test examples", train.len(), test.len());
    Ok(())
}

fn train_ensemble(cfg: &Config, a: &TrainEnsembleArgs) -> CliResult<()> {
    let spec = cfg.model()?;
    let train = io::read_dataset(&a.train)?;
    spec.check_dataset(&train)?;
    let members = a.members.unwrap_or(cfg.ensemble.members);
    let alpha = a.alpha.unwrap_or(cfg.ensemble.alpha);
    let tc = cfg.train_config()?;
    let records = build_ensemble(&spec, &train, alpha, members, &tc, cfg.seed)?;
    let hash = train.content_hash();
    for rec in &records {
        let path = a.out.join(io::checkpoint_file_name(rec));
        io::write_checkpoint(&path, &CheckpointFile::new(&spec, hash.clone(), alpha, rec.clone()))?;
    }
    println!("wrote {} checkpoints to {}", records.len(), a.out.display());
    Ok(())
}

fn load_checkpoints(dir: &Path, train: &Dataset) -> CliResult<(ModelSpec, Vec<CheckpointFile>)> {
    let cks = io::read_checkpoint_dir(dir, Some(&train.content_hash()))?;
    let spec = cks[0].spec.clone();
    spec.check_dataset(train)?;
    Ok((spec, cks))
}

fn featurize_cmd(cfg: &Config, a: &FeaturizeArgs) -> CliResult<()> {
    let (train, test) = load_pair(&a.data)?;
    let (spec, cks) = load_checkpoints(&a.checkpoints, &train)?;
    let param_mask = cfg.projection.last_layer_only.then(|| spec.last_layer_params());
    let p = param_mask.as_ref().map_or(spec.param_count(), Vec::len);
    let k = a.k.unwrap_or(cfg.projection.k);
    let mut proj = ProjectionSpec::new(cfg.seed, p, k).with_distribution(cfg.projection.distribution);
    if let Some(b) = cfg.projection.block_count {
        proj = proj.with_blocks(b);
    }
    let records: Vec<CheckpointRecord> = cks.iter().map(|c| c.record.clone()).collect();
    let bundles = featurize_ensemble(
        &records,
        &spec,
        &train,
        &test,
        &proj,
        param_mask.as_deref(),
        cfg.projection.shared_seed,
    )?;
    for (b, ck) in bundles.iter().zip(&cks) {
        let manifest = RunManifest::for_bundle(b, &ck.record, ck.alpha);
        io::write_features(&a.out.join(io::member_dir(b.model_index)), b, &manifest)?;
    }
    println!(
        "wrote {} feature bundles (k = {k}) to {}",
        bundles.len(),
        a.out.display()
    );
    Ok(())
}

fn load_runs(path: &Path, train: Option<&Dataset>, test: Option<&Dataset>) -> CliResult<Vec<SubsetRun>> {
    let rf: RunsFile = io::read_json(path)?;
    let th = train.map(Dataset::content_hash);
    let eh = test.map(Dataset::content_hash);
    rf.verify(th.as_deref(), eh.as_deref())?;
    Ok(rf.runs)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str, method: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| usage(format!("--method {method} needs --{flag}")))
}

fn score(cfg: &Config, a: &ScoreArgs) -> CliResult<()> {
    let (train, test) = load_pair(&a.data)?;
    let name = a
        .method
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    let first_checkpoint = || -> CliResult<(ModelSpec, CheckpointFile)> {
        let (spec, mut cks) = load_checkpoints(require(&a.checkpoints, "checkpoints", &name)?, &train)?;
        Ok((spec, cks.remove(0)))
    };
    let t = match a.method {
        Method::Trak => {
            let dir = require(&a.features, "features", &name)?;
            let bundles = io::read_feature_dir(dir, Some(&train.content_hash()))?;
            check_bundles_match(&bundles, &test)?;
            trak_ensemble_with(&bundles, &cfg.trak)?
        }
        Method::Tracin | Method::Gas => {
            let (spec, cks) = load_checkpoints(require(&a.checkpoints, "checkpoints", &name)?, &train)?;
            let records: Vec<CheckpointRecord> = cks.into_iter().map(|c| c.record).collect();
            let lrs = vec![cfg.train_config()?.lr; records.len()];
            let proj = ProjectionSpec::new(cfg.seed, spec.param_count(), cfg.projection.k)
                .with_distribution(cfg.projection.distribution);
            if a.method == Method::Tracin {
                tracin(&records, &lrs, &spec, &train, &test, Some(&proj))?
            } else {
                gas(&records, &lrs, &spec, &train, &test, Some(&proj))?
            }
        }
        Method::Repsim => {
            let (spec, ck) = first_checkpoint()?;
            representation_similarity(&ck.record, &spec, &train, &test)?
        }
        Method::If => {
            let (spec, ck) = first_checkpoint()?;
            influence_function(
                &spec,
                &ck.record.params,
                &train,
                &test,
                cfg.influence.mode,
                cfg.influence.damping,
            )?
        }
        Method::NewtonLoo => {
            let (spec, ck) = first_checkpoint()?;
            if !spec.is_binary_logreg() {
                return Err(usage("newton-loo needs a binary logreg model"));
            }
            let ridge = cfg
                .train
                .l2_ridge
                .unwrap_or(crate::training::TrainConfig::newton().l2_ridge);
            newton_loo(&train, &test, &ck.record.params, ridge)?
        }
        Method::Datamodel | Method::EmpInf => {
            let runs = load_runs(require(&a.runs, "runs", &name)?, Some(&train), Some(&test))?;
            let mut t = if a.method == Method::Datamodel {
                datamodel_matrix(&runs, &cfg.lasso.to_config())?
            } else {
                empirical_influence_matrix(&runs)?
            };
            t.provenance.dataset_hash = train.content_hash();
            t
        }
    };
    let t = maybe_threshold(cfg, a, &train, &test, t)?;
    let sha = io::write_scores(&a.out, &t)?;
    println!(
        "method {} scores {}x{} written to {} sha256 {sha}",
        t.method,
        t.n_test(),
        t.n_train(),
        a.out.display()
    );
    Ok(())
}

fn check_bundles_match(bundles: &[FeatureBundle], test: &Dataset) -> CliResult<()> {
    if bundles.iter().any(|b| b.n_test() != test.len()) {
        return Err(Error::invalid("feature bundles were computed for a different test set size").into());
    }
    Ok(())
}

fn maybe_threshold(
    cfg: &Config,
    a: &ScoreArgs,
    train: &Dataset,
    test: &Dataset,
    t: AttributionMatrix,
) -> CliResult<AttributionMatrix> {
    if cfg.threshold.mode == ThresholdMode::Off {
        return Ok(t);
    }
    let path = a
        .runs
        .as_deref()
        .ok_or_else(|| usage("threshold cross-validation needs --runs"))?;
    let runs = load_runs(path, Some(train), Some(test))?;
    let (held, _) = split_runs(&runs, cfg.threshold.cv_fraction, cfg.seed)?;
    let (value, out) = cross_validate_threshold(&t, &held, &cfg.threshold)?;
    eprintln!("threshold {:?} chose {value}", cfg.threshold.mode);
    Ok(out)
}

fn retrainer(cfg: &Config) -> CliResult<Retrainer> {
    Ok(Retrainer::new(cfg.model()?, cfg.train_config()?))
}

fn make_runs(cfg: &Config, a: &MakeRunsArgs) -> CliResult<()> {
    let (train, test) = load_pair(&a.data)?;
    let r = retrainer(cfg)?;
    r.spec.check_dataset(&train)?;
    let m = a.m.unwrap_or(cfg.runs.m);
    let reps = a.reps.unwrap_or(cfg.runs.reps);
    let alpha = a.alpha.unwrap_or(cfg.runs.alpha);
    let runs = produce_runs(&r, &train, &test, alpha, m, reps, cfg.seed)?;
    let rf = RunsFile {
        train_hash: train.content_hash(),
        test_hash: test.content_hash(),
        spec_hash: r.spec.content_hash(),
        alpha,
        reps,
        runs,
    };
    io::write_json(&a.out, &rf)?;
    println!("wrote {m} runs x {reps} reps to {}", a.out.display());
    Ok(())
}

fn lds_cmd(cfg: &Config, a: &LdsArgs) -> CliResult<()> {
    let t = io::read_scores(&a.scores)?;
    let rf: RunsFile = io::read_json(&a.runs)?;
    if !t.provenance.dataset_hash.is_empty() {
        rf.verify(Some(&t.provenance.dataset_hash), None)?;
    }
    let opts = LdsOptions {
        seed: cfg.seed,
        ..cfg.lds
    };
    let mut report = lds_with(&t, &rf.runs, &opts)?;
    report.alpha = rf.alpha;
    report.reps = rf.reps;
    write_text(a.out.as_deref(), &report.to_csv())?;
    eprintln!(
        "{}: mean LDS {:.4} [{:.4}, {:.4}] over {} runs",
        t.method, report.mean_lds, report.ci_low, report.ci_high, report.runs
    );
    Ok(())
}

fn brittleness_cmd(cfg: &Config, a: &BrittlenessArgs) -> CliResult<()> {
    let (train, test) = load_pair(&a.data)?;
    let t = io::read_scores(&a.scores)?;
    check_scores(&t, &train, &test)?;
    let r = retrainer(cfg)?;
    let mut csv = String::from("target_index,flip_budget,random_flip_budget\n");
    let (mut wins, mut trials) = (0, 0);
    // Budgets past the largest evaluated one count as "never flipped".
    let never = a.budgets.iter().max().copied().unwrap_or(0) + 1;
    for &ti in &a.targets {
        if ti >= test.len() {
            return Err(usage(format!("target {ti} out of range {}", test.len())));
        }
        let target = test.get(ti);
        let res = brittleness_with_order(
            &removal_order(t.scores.row(ti)),
            &train,
            &r,
            target,
            &a.budgets,
            a.reps,
            cfg.seed,
        )?;
        let fmt = |b: Option<usize>| b.map_or("none".to_string(), |v| v.to_string());
        let rand = if a.compare_random {
            let order = random_order(train.len(), seed::derive(cfg.seed, seed::TAG_RANDOM_ORDER, ti as u64));
            let rr = brittleness_with_order(&order, &train, &r, target, &a.budgets, a.reps, cfg.seed)?;
            let (x, y) = (res.flip_budget.unwrap_or(never), rr.flip_budget.unwrap_or(never));
            if x != y {
                trials += 1;
                wins += usize::from(x < y);
            }
            fmt(rr.flip_budget)
        } else {
            String::new()
        };
        csv.push_str(&format!("{ti},{},{rand}\n", fmt(res.flip_budget)));
    }
    write_text(a.out.as_deref(), &csv)?;
    if a.compare_random {
        eprintln!(
            "attribution order flips earlier in {wins}/{trials} untied pairs, sign test p = {:.4}",
            sign_test_p(wins, trials)
        );
    }
    Ok(())
}

fn check_scores(t: &AttributionMatrix, train: &Dataset, test: &Dataset) -> CliResult<()> {
    if t.n_train() != train.len() || t.n_test() != test.len() {
        return Err(Error::invalid(format!(
            "scores are {}x{}, data is {}x{}",
            t.n_test(),
            t.n_train(),
            test.len(),
            train.len()
        ))
        .into());
    }
    let h = train.content_hash();
    if !t.provenance.dataset_hash.is_empty() && t.provenance.dataset_hash != h {
        return Err(Error::HashMismatch {
            what: "scores training set",
            expected: h,
            found: t.provenance.dataset_hash.clone(),
        }
        .into());
    }
    Ok(())
}

fn counterfactual_cmd(cfg: &Config, a: &CounterfactualArgs) -> CliResult<()> {
    let (train, test) = load_pair(&a.data)?;
    let t = io::read_scores(&a.scores)?;
    check_scores(&t, &train, &test)?;
    let r = retrainer(cfg)?;
    let orders: Vec<Vec<usize>> = (0..test.len())
        .map(|ti| {
            if a.random {
                random_order(train.len(), seed::derive(cfg.seed, seed::TAG_RANDOM_ORDER, ti as u64))
            } else {
                removal_order(t.scores.row(ti))
            }
        })
        .collect();
    let rep = counterfactual_removal(&orders, &train, &r, &test, a.k, a.reps, cfg.seed)?;
    write_text(a.out.as_deref(), &rep.to_csv())?;
    eprintln!("mean drop after removing {} examples: {:.4}", a.k, rep.mean_drop);
    Ok(())
}

/// Estimator variants compared by `ablate`.
pub fn ablation_variants() -> Vec<(&'static str, TrakOptions)> {
    let full = TrakOptions::default();
    vec![
        ("full", full),
        (
            "no_reweight",
            TrakOptions {
                reweight: false,
                ..full
            },
        ),
        ("no_q", TrakOptions { use_q: false, ..full }),
        (
            "averaging_in",
            TrakOptions {
                averaging: Averaging::In,
                ..full
            },
        ),
        (
            "with_r",
            TrakOptions {
                r_weighting: true,
                ..full
            },
        ),
        ("with_leverage", TrakOptions { leverage: true, ..full }),
    ]
}

fn ablate(cfg: &Config, a: &AblateArgs) -> CliResult<()> {
    let bundles = io::read_feature_dir(&a.features, None)?;
    let rf: RunsFile = io::read_json(&a.runs)?;
    rf.verify(Some(&bundles[0].dataset_hash), None)?;
    let opts = LdsOptions {
        seed: cfg.seed,
        ..cfg.lds
    };
    let mut csv = String::from("variant,mean_lds,ci_low,ci_high\n");
    for (name, o) in ablation_variants() {
        let t = trak_ensemble_with(&bundles, &o)?;
        let r = lds_with(&t, &rf.runs, &opts)?;
        csv.push_str(&format!("{name},{},{},{}\n", r.mean_lds, r.ci_low, r.ci_high));
    }
    write_text(a.out.as_deref(), &csv)?;
    if let Some(p) = &a.emit_plot_data {
        let mut sizes: Vec<usize> = std::iter::successors(Some(1usize), |m| Some(m * 2))
            .take_while(|&m| m < bundles.len())
            .collect();
        sizes.push(bundles.len());
        let mut plot = String::from("# wall_seconds mean_lds\n");
        for m in sizes {
            let start = Instant::now();
            let t = trak_ensemble_with(&bundles[..m], &cfg.trak)?;
            let secs = start.elapsed().as_secs_f64();
            let r = lds_with(
                &t,
                &rf.runs,
                &LdsOptions {
                    bootstrap_resamples: 0,
                    ..opts
                },
            )?;
            plot.push_str(&format!("{secs:.6} {}\n", r.mean_lds));
        }
        io::store::atomic_write(p, plot.as_bytes())?;
    }
    Ok(())
}

/// Hash of a score payload as `score` reports it.
pub fn scores_payload_sha256(t: &AttributionMatrix) -> crate::Result<String> {
    Ok(io::store::sha256_hex(&io::store::encode_matrix(
        &t.scores,
        io::StoreKind::Scores,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_method_is_usage_error() {
        assert_eq!(
            run(["trak", "score", "--method", "magic", "--train", "a", "--test", "b", "--out", "c"]),
            EXIT_USAGE
        );
        assert_eq!(run(["trak"]), EXIT_USAGE);
        assert_eq!(run(["trak", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_file_is_data_error() {
        assert_eq!(
            run(["trak", "lds", "--scores", "/nonexistent/s", "--runs", "/nonexistent/r"]),
            EXIT_DATA
        );
    }

    #[test]
    fn numerical_errors_map_to_three() {
        assert_eq!(Failure::Run(Error::Diverged { epoch: 1 }).exit_code(), EXIT_NUMERICAL);
        assert_eq!(
            Failure::Run(Error::InsufficientRuns { needed: 2, found: 1 }).exit_code(),
            EXIT_DATA
        );
    }
}
