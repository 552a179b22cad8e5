//! Operator-facing command line binding the pipeline end to end:
//! ingest or synthesize a dataset, pretrain entity embeddings on the
//! relation graph, train the recommender, evaluate ranking quality, and
//! render reports. One top-level seed fans out into named streams, so
//! every command is reproducible byte for byte.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 internal
//! error, 2 input error, 3 missing prerequisite artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hpm::data::dataset::Dataset;
use hpm::data::ingest::ingest;
use hpm::data::splits::Role;
use hpm::data::synth::{generate, SynthConfig};
use hpm::data::Relation;
use hpm::error::{Error, Result};
use hpm::eval::{evaluate_split, UserRank, EVAL_KS};
use hpm::gradcheck;
use hpm::kge::{pretrain_on_graph, EmbeddingTables, PretrainConfig};
use hpm::model::{HpmModel, Variant};
use hpm::rng::stream;
use hpm::scel::KernelParams;
use hpm::train::{train, TrainConfig};

pub const REPORT_SCHEMA: &str = "hpm-report-v1";

/// Which kind of raw data the run is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetChoice {
    AmazonFormat,
    Synthetic,
}

/// Starting values for the temporal kernel scales, in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelInit {
    pub sigma_item: f64,
    pub mu_item: f64,
    pub sigma_cat: f64,
    pub mu_cat: f64,
}

impl Default for KernelInit {
    fn default() -> Self {
        KernelInit { sigma_item: 7.0, mu_item: 30.0, sigma_cat: 7.0, mu_cat: 30.0 }
    }
}

impl KernelInit {
    fn to_params(&self) -> Result<KernelParams> {
        KernelParams::new(self.sigma_item, self.mu_item, self.sigma_cat, self.mu_cat)
    }
}

/// Everything a full run needs, loaded from strict JSON: training
/// hyperparameters, artifact locations, data source, and ablation
/// settings. Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub pretrain_lr: f64,
    pub pretrain_epochs: usize,
    pub margin: f64,
    pub lambda: f64,
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub dropout: f64,
    pub seed: u64,
    pub max_len: usize,
    pub dataset: DatasetChoice,
    pub reviews_path: Option<PathBuf>,
    pub metadata_path: Option<PathBuf>,
    pub synth: SynthConfig,
    pub price_tolerance: f64,
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_path: PathBuf,
    pub variant: String,
    pub kernel_init: KernelInit,
    pub random_init: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            epochs: t.epochs,
            patience: t.patience,
            batch_size: t.batch_size,
            lr: t.lr,
            pretrain_lr: t.pretrain_lr,
            pretrain_epochs: 100,
            margin: 1.0,
            lambda: t.lambda,
            d: t.d,
            heads: t.heads,
            layers: t.layers,
            dropout: t.dropout,
            seed: t.seed,
            max_len: 20,
            dataset: DatasetChoice::Synthetic,
            reviews_path: None,
            metadata_path: None,
            synth: SynthConfig::default(),
            price_tolerance: 0.1,
            data_dir: PathBuf::from("hpm-data"),
            checkpoint_dir: PathBuf::from("hpm-checkpoints"),
            report_path: PathBuf::from("hpm-report.json"),
            variant: "full".to_string(),
            kernel_init: KernelInit::default(),
            random_init: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.to_train_config().validate()?;
        self.synth.validate()?;
        self.kernel_init.to_params()?;
        Variant::parse(&self.variant)?;
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be positive".into()));
        }
        if self.pretrain_epochs == 0 {
            return Err(Error::Config("pretrain_epochs must be positive".into()));
        }
        if !(self.price_tolerance >= 0.0 && self.price_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "price_tolerance must be non-negative, got {}",
                self.price_tolerance
            )));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        Ok(())
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            lr: self.lr,
            pretrain_lr: self.pretrain_lr,
            lambda: self.lambda,
            d: self.d,
            heads: self.heads,
            layers: self.layers,
            dropout: self.dropout,
            seed: self.seed,
        }
    }

    pub fn to_pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            lr: self.pretrain_lr,
            epochs: self.pretrain_epochs,
            margin: self.margin,
            ..Default::default()
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.data_dir.join("dataset.json")
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.data_dir.join("ground_truth.json")
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.checkpoint_dir.join("embeddings.json")
    }

    pub fn model_path(&self, variant: Variant) -> PathBuf {
        self.checkpoint_dir.join(format!("model-{}.json", variant.name()))
    }

    pub fn train_log_path(&self, variant: Variant) -> PathBuf {
        self.checkpoint_dir.join(format!("train-log-{}.jsonl", variant.name()))
    }

    pub fn pretrain_log_path(&self) -> PathBuf {
        self.checkpoint_dir.join("pretrain-log.jsonl")
    }

    pub fn gradcheck_path(&self) -> PathBuf {
        self.checkpoint_dir.join("gradcheck.json")
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Aggregated metrics plus the per-user ranks they came from, as written
/// by `eval` and rendered by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub variant: String,
    pub role: String,
    pub seed: u64,
    pub evaluated_users: usize,
    pub skipped_users: Vec<usize>,
    pub hr: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub ranks: Vec<UserRank>,
}

fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "variant {} on the {} split, seed {}\n",
        report.variant, report.role, report.seed
    ));
    out.push_str("    K      HR@K    NDCG@K\n");
    for k in EVAL_KS {
        out.push_str(&format!(
            "  {k:>3}    {:.4}    {:.4}\n",
            report.hr.get(&k).copied().unwrap_or(0.0),
            report.ndcg.get(&k).copied().unwrap_or(0.0),
        ));
    }
    out.push_str(&format!(
        "  {} users evaluated, {} skipped\n",
        report.evaluated_users,
        report.skipped_users.len()
    ));
    out
}

fn require(path: &Path, what: &str, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite(format!(
            "{what} not found at {}; {hint}",
            path.display()
        )))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string(value)?)
}

fn write_json_lines<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut text = String::new();
    for v in values {
        text.push_str(&serde_json::to_string(v)?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn print_dataset_summary(ds: &Dataset) {
    println!("  users: {}", ds.sequences.len());
    println!("  items: {}", ds.catalog.n_items());
    println!("  categories: {}", ds.catalog.n_categories());
    for rel in Relation::ALL {
        println!(
            "  edges {}: {} item, {} category",
            rel.name(),
            ds.graph.items(rel).len(),
            ds.graph.categories(rel).len()
        );
    }
    let count = |role: Role| ds.examples(role).count();
    println!(
        "  splits: {} train, {} validation, {} test",
        count(Role::Train),
        count(Role::Validation),
        count(Role::Test)
    );
}

#[derive(Parser)]
#[command(name = "hpm", about = "Hierarchical preference modeling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Builds the processed dataset from raw review and metadata dumps.
    Ingest {
        /// Review events, one JSON object per line.
        reviews: PathBuf,
        /// Item metadata, one JSON object per line.
        metadata: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Overrides the configured data directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generates a synthetic dataset with planted relations.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured data directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretrains entity embeddings on the relation graph.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured pretraining learning rate.
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Trains the recommender and keeps the best validation checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured learning rate.
        #[arg(long)]
        lr: Option<f64>,
        /// Ablation variant: full, no-scel, single-stream, or no-dcl.
        #[arg(long)]
        variant: Option<String>,
        /// Starts from random tables instead of pretrained embeddings.
        #[arg(long)]
        random_init: bool,
        /// Overrides the configured checkpoint directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranks held-out test interactions with a trained checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Ablation variant whose checkpoint to evaluate.
        #[arg(long)]
        variant: Option<String>,
        /// Overrides the configured report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verifies the training gradient against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
    /// Renders a stored metrics report as a plain-text table.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn configured(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_ingest(
    reviews: &Path,
    metadata: &Path,
    mut cfg: RunConfig,
    out: Option<PathBuf>,
) -> Result<()> {
    if let Some(dir) = out {
        cfg.data_dir = dir;
    }
    let ds = ingest(reviews, metadata, cfg.max_len, cfg.price_tolerance)?;
    ds.save(&cfg.dataset_path())?;
    println!("ingest summary");
    print_dataset_summary(&ds);
    println!("wrote {}", cfg.dataset_path().display());
    Ok(())
}

fn cmd_synth(mut cfg: RunConfig, out: Option<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        cfg.data_dir = dir;
    }
    let ds = generate(&cfg.synth, cfg.seed, cfg.max_len, cfg.price_tolerance)?;
    ds.save(&cfg.dataset_path())?;
    let truth = ds
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Contract("generator produced no ground truth".into()))?;
    write_json(&cfg.ground_truth_path(), truth)?;
    println!("synth summary (seed {})", cfg.seed);
    print_dataset_summary(&ds);
    println!("wrote {}", cfg.dataset_path().display());
    println!("wrote {}", cfg.ground_truth_path().display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct PretrainEpoch {
    epoch: usize,
    probe_loss: f64,
}

fn cmd_pretrain(cfg: RunConfig, lr: Option<f64>) -> Result<()> {
    let mut kge_cfg = cfg.to_pretrain_config();
    if let Some(lr) = lr {
        kge_cfg.lr = lr;
    }
    require(
        &cfg.dataset_path(),
        "dataset",
        "run `hpm ingest` or `hpm synth` first",
    )?;
    let ds = Dataset::load(&cfg.dataset_path())?;
    let mut tables = EmbeddingTables::init(
        ds.catalog.n_items(),
        ds.catalog.n_categories(),
        cfg.d,
        &mut stream(cfg.seed, "tables-init"),
    );
    let losses = pretrain_on_graph(&mut tables, &ds.graph, &kge_cfg, cfg.seed)?;
    tables.save(&cfg.embeddings_path())?;
    let log: Vec<PretrainEpoch> = losses
        .iter()
        .enumerate()
        .map(|(i, &probe_loss)| PretrainEpoch { epoch: i + 1, probe_loss })
        .collect();
    write_json_lines(&cfg.pretrain_log_path(), &log)?;
    println!(
        "pretrained {} epochs: probe loss {:.6} -> {:.6}",
        losses.len(),
        losses.first().copied().unwrap_or(f64::NAN),
        losses.last().copied().unwrap_or(f64::NAN)
    );
    println!("wrote {}", cfg.embeddings_path().display());
    println!("wrote {}", cfg.pretrain_log_path().display());
    Ok(())
}

fn cmd_train(
    mut cfg: RunConfig,
    lr: Option<f64>,
    variant: Option<String>,
    random_init: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    if let Some(dir) = out {
        cfg.checkpoint_dir = dir;
    }
    if let Some(lr) = lr {
        cfg.lr = lr;
    }
    if let Some(v) = variant {
        cfg.variant = v;
    }
    let variant = Variant::parse(&cfg.variant)?;
    require(
        &cfg.dataset_path(),
        "dataset",
        "run `hpm ingest` or `hpm synth` first",
    )?;
    let ds = Dataset::load(&cfg.dataset_path())?;
    let tables = if random_init || cfg.random_init {
        EmbeddingTables::init(
            ds.catalog.n_items(),
            ds.catalog.n_categories(),
            cfg.d,
            &mut stream(cfg.seed, "tables-init"),
        )
    } else {
        require(
            &cfg.embeddings_path(),
            "pretrained embeddings",
            "run `hpm pretrain` first or pass --random-init",
        )?;
        EmbeddingTables::load(&cfg.embeddings_path())?
    };
    let outcome = train(
        &cfg.to_train_config(),
        &ds,
        variant,
        tables,
        cfg.kernel_init.to_params()?,
    )?;
    outcome.model.save(&cfg.model_path(variant))?;
    write_json_lines(&cfg.train_log_path(variant), &outcome.log)?;
    for e in &outcome.log {
        println!(
            "epoch {:>3}: joint {:.6}, rec {:.6}, cl {:.6}, val HR@5 {:.4}{}",
            e.epoch,
            e.l_joint,
            e.l_rec,
            e.l_cl,
            e.val_hr5,
            if e.improved { " *" } else { "" }
        );
    }
    println!(
        "best validation HR@5 {:.4} at epoch {}{}",
        outcome.best_val_hr5,
        outcome.best_epoch,
        if outcome.stopped_early { " (stopped early)" } else { "" }
    );
    println!("wrote {}", cfg.model_path(variant).display());
    println!("wrote {}", cfg.train_log_path(variant).display());
    Ok(())
}

fn cmd_eval(mut cfg: RunConfig, variant: Option<String>, out: Option<PathBuf>) -> Result<()> {
    if let Some(path) = out {
        cfg.report_path = path;
    }
    if let Some(v) = variant {
        cfg.variant = v;
    }
    let variant = Variant::parse(&cfg.variant)?;
    require(
        &cfg.dataset_path(),
        "dataset",
        "run `hpm ingest` or `hpm synth` first",
    )?;
    require(
        &cfg.model_path(variant),
        "trained checkpoint",
        "run `hpm train` for this variant first",
    )?;
    let ds = Dataset::load(&cfg.dataset_path())?;
    let model = HpmModel::load(&cfg.model_path(variant))?;
    if model.variant != variant {
        return Err(Error::DataIntegrity(format!(
            "checkpoint at {} carries variant {} but {} was requested",
            cfg.model_path(variant).display(),
            model.variant.name(),
            variant.name()
        )));
    }
    let evaluation = evaluate_split(&model, &ds, Role::Test, cfg.seed)?;
    for &user in &evaluation.skipped_users {
        eprintln!("warning: user {user} skipped, fewer than 99 fresh negatives");
    }
    let report = EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        variant: variant.name().to_string(),
        role: Role::Test.name().to_string(),
        seed: cfg.seed,
        evaluated_users: evaluation.ranks.len(),
        skipped_users: evaluation.skipped_users.clone(),
        hr: evaluation.hr.clone(),
        ndcg: evaluation.ndcg.clone(),
        ranks: evaluation.ranks.clone(),
    };
    write_json(&cfg.report_path, &report)?;
    print!("{}", render_report(&report));
    println!("wrote {}", cfg.report_path.display());
    Ok(())
}

fn cmd_gradcheck(cfg: RunConfig) -> Result<()> {
    let report = gradcheck::run_default(cfg.seed)?;
    for t in &report.tensors {
        println!(
            "  {:<28} entries {:>4}  max rel err {:.3e}",
            t.name, t.entries, t.max_rel_err
        );
    }
    write_json(&cfg.gradcheck_path(), &report)?;
    println!("wrote {}", cfg.gradcheck_path().display());
    if report.pass {
        println!(
            "gradcheck pass: {} entries, max rel err {:.3e} < {:.0e}",
            report.entries_checked, report.max_rel_err, report.tolerance
        );
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "gradient check failed: max rel err {:.3e} over {} entries",
            report.max_rel_err, report.entries_checked
        )))
    }
}

fn cmd_report(cfg: RunConfig) -> Result<()> {
    require(&cfg.report_path, "metrics report", "run `hpm eval` first")?;
    let text = std::fs::read_to_string(&cfg.report_path)
        .map_err(|e| Error::io(&cfg.report_path, e))?;
    let report: EvalReport = serde_json::from_str(&text)?;
    if report.schema != REPORT_SCHEMA {
        return Err(Error::DataIntegrity(format!(
            "report schema {} does not match expected {REPORT_SCHEMA}",
            report.schema
        )));
    }
    print!("{}", render_report(&report));
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { reviews, metadata, common, out } => {
            cmd_ingest(&reviews, &metadata, configured(&common)?, out)
        }
        Command::Synth { common, out } => cmd_synth(configured(&common)?, out),
        Command::Pretrain { common, lr } => cmd_pretrain(configured(&common)?, lr),
        Command::Train { common, lr, variant, random_init, out } => {
            cmd_train(configured(&common)?, lr, variant, random_init, out)
        }
        Command::Eval { common, variant, out } => {
            cmd_eval(configured(&common)?, variant, out)
        }
        Command::Gradcheck { common } => cmd_gradcheck(configured(&common)?),
        Command::Report { common } => cmd_report(configured(&common)?),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Ingest { .. }
        | Error::DataIntegrity(_)
        | Error::Io { .. }
        | Error::Json(_) => 2,
        Error::MissingPrerequisite(_) => 3,
        Error::Shape(_) | Error::Contract(_) | Error::NonFinite(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
