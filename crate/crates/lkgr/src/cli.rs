//! Operator command line: ingest raw TSVs into a validated bundle, train
//! and checkpoint a model, evaluate Top-K metrics, spot-check gradients,
//! export degree statistics, and print per-user recommendations.
//!
//! Every command is deterministic given its seed, and run directories
//! carry provenance (the resolved configuration, the seed, format
//! versions) sufficient to reproduce outputs byte for byte. Exit codes:
//! 0 success, 1 runtime failure (including a failed gradient check),
//! 2 input/validation error. `LKGR_LOG` controls log verbosity
//! (standard filter syntax, default `warn`; logs go to stderr).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{gradient_check, Tape};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_topk, rank_items_for_user, split_dataset, EvalTarget, MetricRow, Split,
    DEFAULT_K_GRID,
};
use crate::graph::{
    build_ukg, derive_seed, load_alignment, load_interactions, load_kg_triples,
    InteractionMatrix, ThresholdRule, Triple, UnifiedKnowledgeGraph,
};
use crate::manifold::Activation;
use crate::model::{
    forward, AblationSwitches, Aggregator, ModelParams, ModelShape, TapeParams,
};
use crate::synthetic::{scale_free_ukg, SyntheticSpec};
use crate::training::{
    draw_epoch_samples, fit, lkgr_loss, Checkpoint, KeepRule, LossKind, ScoredSample,
    TrainConfig,
};

/// Bundle directory format version (`meta.json`).
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "lkgr",
    version,
    about = "Knowledge-aware recommender on the Lorentz model of hyperbolic space"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)] // parsed once; size is irrelevant
enum Command {
    /// Validate raw TSV data and write a canonical dataset bundle.
    Ingest(IngestArgs),
    /// Train a model on a bundle and write checkpoint + history.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split over a K grid.
    Eval(EvalArgs),
    /// Check analytic gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// Export the node-degree histogram of a bundle as CSV.
    DegreeStats(DegreeStatsArgs),
    /// Print Top-K recommendations for one user.
    Recommend(RecommendArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Knowledge-graph triples TSV: head<TAB>relation<TAB>tail.
    #[arg(long)]
    kg: PathBuf,
    /// Interactions TSV: user<TAB>item, optionally <TAB>rating.
    #[arg(long)]
    interactions: PathBuf,
    /// Optional item→entity alignment TSV: item<TAB>entity.
    #[arg(long)]
    alignment: Option<PathBuf>,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Positive-feedback rule: "auto" (rating ≥ 4 when a rating column
    /// exists, else keep all), "none" (keep all), or a numeric cutoff.
    #[arg(long, default_value = "auto")]
    threshold: String,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Ingested bundle directory.
    #[arg(long)]
    bundle: PathBuf,
    /// Run output directory.
    #[arg(long)]
    out: PathBuf,
    /// TOML configuration file (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyper-parameter preset: book, movie, restaurant, or desk.
    #[arg(long)]
    dataset_preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable one feature (repeatable): is, ke, hg, lka.
    /// Overrides any list in --config.
    #[arg(long)]
    ablate: Vec<String>,
    /// Neighborhood aggregator: sum, concat, or neighbor.
    #[arg(long)]
    aggregator: Option<String>,
    /// Propagation depth L.
    #[arg(long)]
    depth: Option<usize>,
    /// Embedding dimension d.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Neighbors sampled per node and class.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Adam learning rate.
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// L2 regularization weight.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Consecutive non-improving epochs tolerated before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// K of the per-epoch evaluation metric.
    #[arg(long)]
    eval_k: Option<usize>,
    /// Loss form: bce or literal.
    #[arg(long)]
    loss: Option<String>,
    /// Pointwise activation: relu, tanh, or identity.
    #[arg(long)]
    activation: Option<String>,
    /// Which epoch's parameters the checkpoint stores: "best" (highest
    /// evaluation-split recall) or "final" (last epoch run, no model
    /// selection).
    #[arg(long)]
    keep: Option<String>,
    /// Worker threads for evaluation (1 forces the serial path).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Bundle the checkpoint was trained on.
    #[arg(long)]
    bundle: PathBuf,
    /// Output directory for metrics.jsonl / metrics.csv.
    #[arg(long)]
    out: PathBuf,
    /// K grid (comma-separated or repeated). Default: 1,5,10,20,50,100.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Split to evaluate: train, eval, or test.
    #[arg(long, default_value = "test")]
    target: String,
    /// Worker threads for evaluation (1 forces the serial path).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Central-difference step size.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Maximum tolerated relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct DegreeStatsArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Output CSV path (degree,count rows for log-log plotting).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Bundle the checkpoint was trained on.
    #[arg(long)]
    bundle: PathBuf,
    /// User id in the bundle's id space.
    #[arg(long)]
    user: u32,
    /// How many items to print.
    #[arg(long, default_value_t = 10)]
    k: usize,
}

/// Parse argv, run one command, and return the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    init_logging();
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("LKGR_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Ingest(args) => cmd_ingest(&args).map(|_| true),
        Command::Train(args) => cmd_train(&args).map(|_| true),
        Command::Eval(args) => cmd_eval(&args).map(|_| true),
        Command::Gradcheck(args) => cmd_gradcheck(&args),
        Command::DegreeStats(args) => cmd_degree_stats(&args).map(|_| true),
        Command::Recommend(args) => cmd_recommend(&args).map(|_| true),
    }
}

// ---------------------------------------------------------------- bundle

/// Summary statistics stored beside the canonical bundle files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct BundleMeta {
    format_version: u32,
    n_users: u32,
    n_items: u32,
    n_entities: u32,
    n_kg_relations: u32,
    n_kg_triples: usize,
    n_interactions: usize,
    threshold: String,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn parse_threshold(s: &str) -> Result<ThresholdRule> {
    match s {
        "auto" => Ok(ThresholdRule::Auto),
        "none" => Ok(ThresholdRule::KeepAll),
        other => other
            .parse::<f64>()
            .map(ThresholdRule::AtLeast)
            .map_err(|_| {
                Error::InvalidArgument(format!(
                    "threshold must be auto, none, or a number, got {other:?}"
                ))
            }),
    }
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let mut triples = load_kg_triples(&args.kg)?;
    let rule = parse_threshold(&args.threshold)?;
    let interactions = load_interactions(&args.interactions, rule)?;
    let alignment = match &args.alignment {
        Some(path) => Some(load_alignment(path)?),
        None => None,
    };
    let (ukg, interactions) = build_ukg(&triples, &interactions, alignment.as_ref())?;

    // Canonical form: sorted, deduplicated, entity id space.
    triples.sort_unstable();
    triples.dedup();
    let mut kg_text = String::new();
    for t in &triples {
        kg_text.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
    }
    let mut inter_text = String::new();
    for &(user, item) in interactions.pairs() {
        inter_text.push_str(&format!("{user}\t{item}\n"));
    }
    let meta = BundleMeta {
        format_version: BUNDLE_VERSION,
        n_users: ukg.n_users(),
        n_items: ukg.n_items(),
        n_entities: ukg.n_entities(),
        n_kg_relations: ukg.n_relations() - 1,
        n_kg_triples: triples.len(),
        n_interactions: interactions.pairs().len(),
        threshold: args.threshold.clone(),
    };

    create_dir(&args.out)?;
    write_text(&args.out.join("kg.tsv"), &kg_text)?;
    write_text(&args.out.join("interactions.tsv"), &inter_text)?;
    let mut meta_text =
        serde_json::to_string(&meta).map_err(|e| Error::Serde(e.to_string()))?;
    meta_text.push('\n');
    write_text(&args.out.join("meta.json"), &meta_text)?;

    println!(
        "ingested: users {}, items {}, entities {}, kg relations {}, kg triples {}, interactions {}",
        meta.n_users,
        meta.n_items,
        meta.n_entities,
        meta.n_kg_relations,
        meta.n_kg_triples,
        meta.n_interactions
    );
    println!("bundle written to {}", args.out.display());
    Ok(())
}

fn load_bundle(dir: &Path) -> Result<(Vec<Triple>, InteractionMatrix, BundleMeta)> {
    let meta_path = dir.join("meta.json");
    let meta: BundleMeta = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|e| Error::Serde(format!("{}: {e}", meta_path.display())))?;
    if meta.format_version != BUNDLE_VERSION {
        return Err(Error::InvalidInput(format!(
            "bundle format version {} (this binary reads version {BUNDLE_VERSION})",
            meta.format_version
        )));
    }
    let triples = load_kg_triples(&dir.join("kg.tsv"))?;
    // Bundle interactions are already thresholded and entity-aligned.
    let interactions = load_interactions(&dir.join("interactions.tsv"), ThresholdRule::KeepAll)?;
    Ok((triples, interactions, meta))
}

// ----------------------------------------------------------- train config

/// File-backed run configuration; every key optional, unknown keys
/// rejected. CLI flags override file values, which override the preset.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    dataset_preset: Option<String>,
    dim: Option<usize>,
    depth: Option<usize>,
    batch_size: Option<usize>,
    sample_size: Option<usize>,
    eta: Option<f64>,
    lambda: Option<f64>,
    aggregator: Option<String>,
    activation: Option<String>,
    loss: Option<String>,
    epochs_max: Option<usize>,
    patience: Option<usize>,
    eval_k: Option<usize>,
    seed: Option<u64>,
    ablate: Option<Vec<String>>,
    keep: Option<String>,
    threads: Option<usize>,
}

/// The echo written into the run directory for provenance.
#[derive(Debug, Serialize)]
struct ResolvedRun<'a> {
    preset: &'a str,
    ablate: &'a [String],
    keep: String,
    threads: Option<usize>,
    config: &'a TrainConfig,
}

#[derive(Debug)]
struct Resolved {
    config: TrainConfig,
    switches: AblationSwitches,
    ablate: Vec<String>,
    preset: String,
    keep: KeepRule,
    threads: Option<usize>,
}

fn preset_config(name: &str) -> Result<TrainConfig> {
    match name {
        "book" => Ok(TrainConfig::book()),
        "movie" => Ok(TrainConfig::movie()),
        "restaurant" => Ok(TrainConfig::restaurant()),
        "desk" => Ok(TrainConfig::desk()),
        other => Err(Error::InvalidArgument(format!(
            "unknown dataset preset {other:?} (expected book, movie, restaurant, or desk)"
        ))),
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(Error::InvalidArgument(format!(
            "unknown activation {other:?} (expected relu, tanh, or identity)"
        ))),
    }
}

fn validate_config(config: &TrainConfig) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidArgument(msg));
    if config.dim == 0 {
        return bad("dim must be ≥ 1".into());
    }
    if config.batch_size == 0 {
        return bad("batch size must be ≥ 1".into());
    }
    if config.sample_size == 0 {
        return bad("sample size must be ≥ 1".into());
    }
    if config.eval_k == 0 {
        return bad("eval K must be ≥ 1".into());
    }
    if !(config.eta.is_finite() && config.eta > 0.0) {
        return bad(format!("learning rate must be finite and > 0, got {}", config.eta));
    }
    if !(config.lambda.is_finite() && config.lambda >= 0.0) {
        return bad(format!("lambda must be finite and ≥ 0, got {}", config.lambda));
    }
    Ok(())
}

fn resolve_train_config(args: &TrainArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => {
            let text = read_text(path)?;
            toml::from_str::<RunConfigFile>(&text)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?
        }
        None => RunConfigFile::default(),
    };

    let preset = args
        .dataset_preset
        .clone()
        .or_else(|| file.dataset_preset.clone())
        .unwrap_or_else(|| "desk".into());
    let mut config = preset_config(&preset)?;

    // File values over the preset…
    if let Some(v) = file.dim {
        config.dim = v;
    }
    if let Some(v) = file.depth {
        config.depth = v;
    }
    if let Some(v) = file.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = file.sample_size {
        config.sample_size = v;
    }
    if let Some(v) = file.eta {
        config.eta = v;
    }
    if let Some(v) = file.lambda {
        config.lambda = v;
    }
    if let Some(v) = &file.aggregator {
        config.aggregator = v.parse()?;
    }
    if let Some(v) = &file.activation {
        config.activation = parse_activation(v)?;
    }
    if let Some(v) = &file.loss {
        config.loss = v.parse()?;
    }
    if let Some(v) = file.epochs_max {
        config.epochs_max = v;
    }
    if let Some(v) = file.patience {
        config.patience = v;
    }
    if let Some(v) = file.eval_k {
        config.eval_k = v;
    }
    if let Some(v) = file.seed {
        config.seed = v;
    }

    // …and flags over the file.
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.depth {
        config.depth = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.sample_size {
        config.sample_size = v;
    }
    if let Some(v) = args.eta {
        config.eta = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = &args.aggregator {
        config.aggregator = v.parse()?;
    }
    if let Some(v) = &args.activation {
        config.activation = parse_activation(v)?;
    }
    if let Some(v) = &args.loss {
        config.loss = v.parse()?;
    }
    if let Some(v) = args.epochs {
        config.epochs_max = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.eval_k {
        config.eval_k = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    validate_config(&config)?;

    let ablate = if !args.ablate.is_empty() {
        args.ablate.clone()
    } else {
        file.ablate.clone().unwrap_or_default()
    };
    let mut switches = AblationSwitches::full();
    for tag in &ablate {
        switches = switches.disable(tag)?;
    }

    let keep: KeepRule = match args.keep.as_ref().or(file.keep.as_ref()) {
        Some(s) => s.parse()?,
        None => KeepRule::default(),
    };

    Ok(Resolved {
        config,
        switches,
        ablate,
        preset,
        keep,
        threads: args.threads.or(file.threads),
    })
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::InvalidArgument("--threads must be ≥ 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("could not configure {n} threads: {e}")))
}

// ------------------------------------------------------------------ train

/// One `history.jsonl` line.
#[derive(Serialize)]
struct HistoryRow<'a> {
    epoch: usize,
    split: &'a str,
    k: usize,
    recall: f64,
    ndcg: f64,
    loss: f64,
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let resolved = resolve_train_config(args)?;
    configure_threads(resolved.threads)?;
    let (triples, interactions, _meta) = load_bundle(&args.bundle)?;

    create_dir(&args.out)?;
    let echo = ResolvedRun {
        preset: &resolved.preset,
        ablate: &resolved.ablate,
        keep: resolved.keep.to_string(),
        threads: resolved.threads,
        config: &resolved.config,
    };
    let echo_text =
        toml::to_string(&echo).map_err(|e| Error::Serde(e.to_string()))?;
    write_text(&args.out.join("config.resolved.toml"), &echo_text)?;

    let out = fit(&triples, &interactions, &resolved.config, &resolved.switches)?;

    let ckpt = Checkpoint::from_fit(resolved.config, resolved.switches, &out, resolved.keep);
    ckpt.save(&args.out.join("checkpoint.json"))?;

    let mut history_text = String::new();
    for rec in &out.history {
        let row = HistoryRow {
            epoch: rec.epoch,
            split: "eval",
            k: rec.k,
            recall: rec.recall,
            ndcg: rec.ndcg,
            loss: rec.loss,
        };
        history_text
            .push_str(&serde_json::to_string(&row).map_err(|e| Error::Serde(e.to_string()))?);
        history_text.push('\n');
    }
    write_text(&args.out.join("history.jsonl"), &history_text)?;

    match ckpt.epoch {
        Some(epoch) => {
            let rec = out.history[epoch - 1];
            println!(
                "kept epoch {epoch} ({} rule): eval recall@{} {}, ndcg@{1} {}, loss {}",
                resolved.keep, rec.k, rec.recall, rec.ndcg, rec.loss
            );
        }
        None => println!("no epochs ran; checkpoint holds the initialized parameters"),
    }
    println!("run written to {}", args.out.display());
    Ok(())
}

// ------------------------------------------------------------------- eval

fn parse_target(s: &str) -> Result<EvalTarget> {
    match s {
        "train" => Ok(EvalTarget::Train),
        "eval" => Ok(EvalTarget::Eval),
        "test" => Ok(EvalTarget::Test),
        other => Err(Error::InvalidArgument(format!(
            "unknown split {other:?} (expected train, eval, or test)"
        ))),
    }
}

/// Rebuild the training-split graph the checkpoint was fitted on and
/// verify the tensor shapes still match the bundle.
fn rebuild_graph(
    ckpt: &Checkpoint,
    triples: &[Triple],
    interactions: &InteractionMatrix,
) -> Result<(UnifiedKnowledgeGraph, Split)> {
    let split = split_dataset(interactions, (0.6, 0.2, 0.2), ckpt.config.seed)?;
    let train_im = interactions.with_pairs(split.train.clone())?;
    let (ukg, _) = build_ukg(triples, &train_im, None)?;
    let shape = &ckpt.params.shape;
    if ukg.n_nodes() != shape.n_nodes || ukg.n_relations() != shape.n_relations {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint expects {} nodes / {} relations but the bundle gives {} / {}; \
             was it trained on this bundle?",
            shape.n_nodes,
            shape.n_relations,
            ukg.n_nodes(),
            ukg.n_relations()
        )));
    }
    Ok((ukg, split))
}

fn metric_files(target: &str, rows: &[MetricRow]) -> Result<(String, String)> {
    #[derive(Serialize)]
    struct JsonRow<'a> {
        target: &'a str,
        k: usize,
        recall: f64,
        ndcg: f64,
        n_users: usize,
    }
    let mut jsonl = String::new();
    let mut csv = String::from("target,k,recall,ndcg,n_users\n");
    for row in rows {
        let json_row = JsonRow {
            target,
            k: row.k,
            recall: row.recall,
            ndcg: row.ndcg,
            n_users: row.n_users,
        };
        jsonl.push_str(
            &serde_json::to_string(&json_row).map_err(|e| Error::Serde(e.to_string()))?,
        );
        jsonl.push('\n');
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            target, row.k, row.recall, row.ndcg, row.n_users
        ));
    }
    Ok((jsonl, csv))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    configure_threads(args.threads)?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let (triples, interactions, _meta) = load_bundle(&args.bundle)?;
    let (ukg, split) = rebuild_graph(&ckpt, &triples, &interactions)?;

    let ks: Vec<usize> = if args.k.is_empty() {
        DEFAULT_K_GRID.to_vec()
    } else {
        args.k.clone()
    };
    let target = parse_target(&args.target)?;
    let rows = evaluate_topk(
        &ckpt.params,
        &ukg,
        &split,
        target,
        &ks,
        ckpt.config.sample_size,
        &ckpt.switches,
        ckpt.config.seed,
    )?;

    create_dir(&args.out)?;
    let (jsonl, csv) = metric_files(&args.target, &rows)?;
    write_text(&args.out.join("metrics.jsonl"), &jsonl)?;
    write_text(&args.out.join("metrics.csv"), &csv)?;

    println!("{:>6} {:>22} {:>22} {:>8}", "k", "recall", "ndcg", "users");
    for row in &rows {
        println!(
            "{:>6} {:>22} {:>22} {:>8}",
            row.k, row.recall, row.ndcg, row.n_users
        );
    }
    println!("metrics written to {}", args.out.display());
    Ok(())
}

// -------------------------------------------------------------- gradcheck

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let data = scale_free_ukg(&SyntheticSpec::tiny(args.seed))?;
    let (ukg, train_im) = build_ukg(&data.triples, &data.interactions, None)?;
    let switches = AblationSwitches::full();
    // Large enough that the regularizer's gradient on otherwise-untouched
    // embeddings clears the central-difference noise floor.
    let lambda = 1e-3;

    println!(
        "{:<10} {:>5} {:>12} {:>12} {:>12} {:>12} {:>12}   status",
        "aggregator", "depth", "embeddings", "relations", "agg_weights", "agg_biases", "curvature"
    );
    let mut all_pass = true;
    for aggregator in Aggregator::ALL {
        for depth in [0usize, 1, 2] {
            let shape = ModelShape {
                n_nodes: ukg.n_nodes(),
                n_relations: ukg.n_relations(),
                dim: 3,
                depth,
                aggregator,
                activation: Activation::Tanh,
            };
            let params = ModelParams::init(
                shape,
                derive_seed(args.seed, &[0xC0EF, depth as u64]),
            );
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                args.seed,
                &[0xBA7C4, depth as u64],
            ));
            let mut batch = draw_epoch_samples(
                train_im.pairs(),
                &data.interactions,
                &ukg,
                depth,
                2,
                &mut rng,
            );
            batch.truncate(2);
            if batch.is_empty() {
                return Err(Error::InvalidInput(
                    "the synthetic set left no trainable pairs".into(),
                ));
            }

            let check = gradient_check(
                |_tape: &Tape, vars| {
                    let tp = TapeParams::from_vars(shape, vars);
                    let mut scored = Vec::new();
                    for b in &batch {
                        scored.push(ScoredSample {
                            user: b.user,
                            item: b.pos_item,
                            positive: true,
                            score: forward(&tp, &b.pos_neighborhood, &switches)
                                .expect("forward"),
                        });
                        scored.push(ScoredSample {
                            user: b.user,
                            item: b.neg_item,
                            positive: false,
                            score: forward(&tp, &b.neg_neighborhood, &switches)
                                .expect("forward"),
                        });
                    }
                    lkgr_loss(&scored, Some(tp.l2_penalty()), lambda, LossKind::Bce)
                        .expect("loss")
                },
                &params.values,
                args.step,
            )?;

            // Worst relative error per parameter class.
            let emb_end = shape.embedding_range(ukg.n_nodes() - 1).end;
            let rel_end = shape.relation_range(ukg.n_relations() - 1)?.end;
            let w_end = shape.agg_weight_range(depth).end;
            let b_end = shape.agg_bias_range(depth).end;
            let mut class_max = [0.0f64; 5];
            for (i, &err) in check.per_coordinate.iter().enumerate() {
                let class = if i < emb_end {
                    0
                } else if i < rel_end {
                    1
                } else if i < w_end {
                    2
                } else if i < b_end {
                    3
                } else {
                    4
                };
                class_max[class] = class_max[class].max(err);
            }
            let pass = check.max_rel_err <= args.tolerance;
            all_pass &= pass;
            println!(
                "{:<10} {:>5} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}   {}",
                aggregator.to_string(),
                depth,
                class_max[0],
                class_max[1],
                class_max[2],
                class_max[3],
                class_max[4],
                if pass { "ok" } else { "FAIL" }
            );
        }
    }
    if !all_pass {
        eprintln!("gradient check failed (tolerance {})", args.tolerance);
    }
    Ok(all_pass)
}

// ----------------------------------------------------------- degree-stats

fn cmd_degree_stats(args: &DegreeStatsArgs) -> Result<()> {
    let (triples, interactions, _meta) = load_bundle(&args.bundle)?;
    let (ukg, _) = build_ukg(&triples, &interactions, None)?;
    let hist = ukg.degree_histogram();
    let mut csv = String::from("degree,count\n");
    for (degree, count) in &hist {
        csv.push_str(&format!("{degree},{count}\n"));
    }
    write_text(&args.out, &csv)?;
    let max_degree = hist.iter().map(|&(d, _)| d).max().unwrap_or(0);
    println!(
        "degree histogram over {} nodes (max degree {}) written to {}",
        ukg.n_nodes(),
        max_degree,
        args.out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- recommend

fn cmd_recommend(args: &RecommendArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let (triples, interactions, _meta) = load_bundle(&args.bundle)?;
    if args.user >= interactions.n_users() {
        return Err(Error::InvalidArgument(format!(
            "user {} out of range (bundle has {} users)",
            args.user,
            interactions.n_users()
        )));
    }
    let (ukg, split) = rebuild_graph(&ckpt, &triples, &interactions)?;
    // Same candidate filtering as test-split evaluation: items the model
    // was trained or tuned on are never recommended back.
    let excluded: BTreeSet<u32> = split.excluded_items(args.user, EvalTarget::Test);
    let rows = rank_items_for_user(
        &ckpt.params,
        &ukg,
        args.user,
        &excluded,
        args.k,
        ckpt.config.sample_size,
        &ckpt.switches,
        ckpt.config.seed,
    )?;
    if rows.is_empty() {
        println!("no candidate items left for user {}", args.user);
        return Ok(());
    }
    println!("rank\titem\tscore");
    for (rank, (item, score)) in rows.iter().enumerate() {
        println!("{}\t{}\t{}", rank + 1, item, score);
    }
    Ok(())
}
