//! Command-line interface.
//!
//! Subcommands: `synth` writes a generated dataset directory, `train` fits a
//! model and leaves a run directory of artifacts, `eval` re-scores a stored
//! checkpoint, and `ablate` / `sweep-k` / `grid` run small studies and print
//! their tables as CSV. Configuration resolves as defaults, then the
//! `--config` JSON file, then individual flags. Exit codes: 0 on success,
//! 1 for usage or validation problems, 2 when training diverges.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use mplex_core::graph::{make_split, GraphError, MultiplexGraph, Split};
use mplex_core::model::SummaryMode;
use mplex_core::synth::{self, CrossMode, SynthConfig, SynthError};
use mplex_core::trainer::{
    grid_search, run_training, GridSpec, TrainConfig, TrainError, TrainOutcome,
};
use mplex_core::Real;

use crate::checkpoint::{self, Checkpoint, CheckpointError};
use crate::dataset::{self, DatasetError};
use crate::report::{build_report, render_report_text, ReportError};
use crate::rundir::{self, RunDirError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    RunDir(#[from] RunDirError),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Train(TrainError::Diverged { .. })
            | CliError::Train(TrainError::AllCellsDiverged) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mplex",
    version,
    about = "Semi-supervised embeddings for multiplex networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-partition dataset directory.
    Synth(SynthArgs),
    /// Train on a dataset and write a run directory of artifacts.
    Train(TrainArgs),
    /// Re-score a stored checkpoint; prints the report as JSON.
    Eval(EvalArgs),
    /// Train ablated variants and print a metric-delta table.
    Ablate(AblateArgs),
    /// Train once per cluster count and print the metric table.
    SweepK(SweepKArgs),
    /// Search regularization weights; prints the grid table.
    Grid(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CrossArg {
    /// Link every node to its own copy in the other layers.
    Identity,
    /// Sample cross links uniformly; needs --p-cross.
    Sampled,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory; must be empty or absent.
    out: PathBuf,
    /// Complete generator config as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_nodes: Option<usize>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    num_relations: Option<usize>,
    /// Edge probability between same-class nodes.
    #[arg(long)]
    p_in: Option<Real>,
    /// Edge probability between different-class nodes.
    #[arg(long)]
    p_out: Option<Real>,
    /// Fraction of edges rewired to random pairs.
    #[arg(long)]
    rho: Option<Real>,
    #[arg(long, value_enum)]
    cross: Option<CrossArg>,
    /// Cross-link probability per ordered pair (with --cross sampled).
    #[arg(long)]
    p_cross: Option<Real>,
    #[arg(long)]
    num_features: Option<usize>,
    #[arg(long)]
    feature_signal: Option<Real>,
    #[arg(long)]
    feature_noise: Option<Real>,
    /// Fraction of nodes whose label is revealed.
    #[arg(long)]
    label_rate: Option<Real>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SummaryArg {
    Cluster,
    MeanPool,
}

/// Training settings shared by every command that fits models. Each flag
/// mirrors a config field; unset flags fall back to the config file, then
/// to the defaults.
#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// Training config as JSON; missing fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<Real>,
    #[arg(long)]
    weight_decay: Option<Real>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Embedding width per relation.
    #[arg(long)]
    embed: Option<usize>,
    /// Graph-convolution layers per relation.
    #[arg(long)]
    layers: Option<usize>,
    /// Clusters per relation; defaults to the label count.
    #[arg(long)]
    clusters: Option<usize>,
    /// Self-loop weight of the propagation kernel.
    #[arg(long)]
    epsilon: Option<Real>,
    /// Negative samples per node in the contrastive term.
    #[arg(long)]
    negatives: Option<usize>,
    /// Weight of the contrastive term.
    #[arg(long)]
    alpha: Option<Real>,
    /// Weight of the cross-layer regularizer.
    #[arg(long)]
    beta: Option<Real>,
    /// Weight of the consensus regularizer.
    #[arg(long)]
    gamma: Option<Real>,
    /// Set both cluster-term weights at once.
    #[arg(long)]
    zeta: Option<Real>,
    /// Weight of the label-smoothness cluster term.
    #[arg(long)]
    zeta_learn: Option<Real>,
    /// Weight of the assignment-orthogonality term.
    #[arg(long)]
    zeta_orth: Option<Real>,
    /// Weight of the supervised term.
    #[arg(long)]
    theta: Option<Real>,
    #[arg(long)]
    seed: Option<u64>,
    /// Global summary used by the contrastive term.
    #[arg(long, value_enum)]
    summary: Option<SummaryArg>,
    /// Force the label mode instead of adopting the dataset's.
    #[arg(long)]
    multi_label: Option<bool>,
    /// Plain gradient descent instead of adaptive moments.
    #[arg(long)]
    plain_gd: Option<bool>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory.
    dataset: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Root for run directories; overrides MPLEX_RUNS.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Seed for sampling the node split (default: the model seed).
    /// Ignored when the dataset pins splits.json.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// A run directory (its best.ckpt is used) or a checkpoint file.
    target: PathBuf,
    /// Dataset directory.
    dataset: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AblateWhich {
    /// Drop the cross-layer regularizer.
    Cross,
    /// Drop the consensus regularizer.
    Cons,
    /// Drop cross alone, then cross and consensus together.
    #[value(name = "cons+cross")]
    ConsCross,
    /// Drop the label-smoothness cluster term.
    ClusLearn,
    /// Drop the assignment-orthogonality term.
    ClusOrth,
    /// Cluster-weighted summaries vs a shared mean-pool summary.
    SummaryMode,
}

#[derive(Args)]
struct AblateArgs {
    /// Which ingredient to remove.
    #[arg(value_enum)]
    which: AblateWhich,
    /// Dataset directory.
    dataset: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Seeds per variant; the table reports medians.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Seed for sampling the node split (default: the model seed).
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct SweepKArgs {
    /// Dataset directory.
    dataset: PathBuf,
    /// Smallest cluster count (inclusive, at least 2).
    #[arg(long)]
    min_k: usize,
    /// Largest cluster count (inclusive).
    #[arg(long)]
    max_k: usize,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Seed for sampling the node split (default: the model seed).
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct GridArgs {
    /// Dataset directory.
    dataset: PathBuf,
    /// Consensus weights to try (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1])]
    gammas: Vec<Real>,
    /// Cluster-term weights to try; each value sets both terms.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1])]
    zetas: Vec<Real>,
    /// Supervised weights to try.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1])]
    thetas: Vec<Real>,
    /// Learning rates to try (default: the resolved config's rate).
    #[arg(long, value_delimiter = ',')]
    learning_rates: Option<Vec<Real>>,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Seed for sampling the node split (default: the model seed).
    #[arg(long)]
    split_seed: Option<u64>,
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args).map(|_| ()),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::SweepK(args) => cmd_sweep_k(args),
        Command::Grid(args) => cmd_grid(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Defaults, then the config file, then flags. The label mode follows the
/// dataset unless the file or a flag pins it explicitly.
fn resolve_config(flags: &ConfigFlags, g: &MultiplexGraph) -> Result<TrainConfig, CliError> {
    let mut config = TrainConfig::default();
    let mut multi_label_pinned = false;
    if let Some(path) = &flags.config {
        let value: serde_json::Value = read_json_file(path)?;
        multi_label_pinned = value.get("multi_label").is_some();
        config = serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }

    if let Some(v) = flags.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = flags.weight_decay {
        config.weight_decay = v;
    }
    if let Some(v) = flags.max_epochs {
        config.max_epochs = v;
    }
    if let Some(v) = flags.patience {
        config.patience = v;
    }
    if let Some(v) = flags.embed {
        config.embed = v;
    }
    if let Some(v) = flags.layers {
        config.layers = v;
    }
    if let Some(v) = flags.clusters {
        config.clusters = Some(v);
    }
    if let Some(v) = flags.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = flags.negatives {
        config.negatives = v;
    }
    if let Some(v) = flags.alpha {
        config.coefficients.alpha = v;
    }
    if let Some(v) = flags.beta {
        config.coefficients.beta = v;
    }
    if let Some(v) = flags.gamma {
        config.coefficients.gamma = v;
    }
    if let Some(v) = flags.zeta {
        config.coefficients.zeta_learn = v;
        config.coefficients.zeta_orth = v;
    }
    if let Some(v) = flags.zeta_learn {
        config.coefficients.zeta_learn = v;
    }
    if let Some(v) = flags.zeta_orth {
        config.coefficients.zeta_orth = v;
    }
    if let Some(v) = flags.theta {
        config.coefficients.theta = v;
    }
    if let Some(v) = flags.seed {
        config.seed = v;
    }
    if let Some(v) = flags.summary {
        config.summary = match v {
            SummaryArg::Cluster => SummaryMode::Cluster,
            SummaryArg::MeanPool => SummaryMode::MeanPool,
        };
    }
    if let Some(v) = flags.multi_label {
        config.multi_label = v;
        multi_label_pinned = true;
    }
    if let Some(v) = flags.plain_gd {
        config.plain_gd = v;
    }
    if !multi_label_pinned {
        config.multi_label = g.multi_label();
    }
    config.validate()?;
    Ok(config)
}

fn resolve_synth(args: &SynthArgs) -> Result<SynthConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => read_json_file(path)?,
        None => SynthConfig::easy_3x2(0),
    };
    if let Some(v) = args.num_nodes {
        config.num_nodes = v;
    }
    if let Some(v) = args.num_classes {
        config.num_classes = v;
    }
    if let Some(v) = args.num_relations {
        config.num_relations = v;
    }
    if let Some(v) = args.p_in {
        config.p_in = v;
    }
    if let Some(v) = args.p_out {
        config.p_out = v;
    }
    if let Some(v) = args.rho {
        config.rho = v;
    }
    match (args.cross, args.p_cross) {
        (Some(CrossArg::Identity), Some(_)) => {
            return Err(CliError::Usage(
                "--p-cross only applies with --cross sampled".into(),
            ))
        }
        (Some(CrossArg::Identity), None) => config.cross = CrossMode::Identity,
        (Some(CrossArg::Sampled), Some(p_cross)) => config.cross = CrossMode::Sampled { p_cross },
        (Some(CrossArg::Sampled), None) => {
            return Err(CliError::Usage("--cross sampled needs --p-cross".into()))
        }
        (None, Some(p_cross)) => match config.cross {
            CrossMode::Sampled { .. } => config.cross = CrossMode::Sampled { p_cross },
            CrossMode::Identity => {
                return Err(CliError::Usage(
                    "--p-cross only applies with --cross sampled".into(),
                ))
            }
        },
        (None, None) => {}
    }
    if let Some(v) = args.num_features {
        config.num_features = v;
    }
    if let Some(v) = args.feature_signal {
        config.feature_signal = v;
    }
    if let Some(v) = args.feature_noise {
        config.feature_noise = v;
    }
    if let Some(v) = args.label_rate {
        config.label_rate = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config.validate()?;
    Ok(config)
}

/// A pinned splits.json wins; otherwise sample from the given seed.
fn resolve_split(
    dir: &Path,
    g: &MultiplexGraph,
    split_seed: Option<u64>,
    config_seed: u64,
) -> Result<Split, CliError> {
    if let Some(split) = dataset::load_split_file(dir)? {
        return Ok(split);
    }
    Ok(make_split(g, split_seed.unwrap_or(config_seed))?)
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let config = resolve_synth(&args)?;
    if args.out.is_file() {
        return Err(CliError::Usage(format!(
            "{} is a file, not a directory",
            args.out.display()
        )));
    }
    if args.out.is_dir() {
        let occupied = std::fs::read_dir(&args.out)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.out.display())))?
            .next()
            .is_some();
        if occupied {
            return Err(CliError::Usage(format!(
                "{} is not empty",
                args.out.display()
            )));
        }
    }
    let g = synth::generate(&config)?;
    dataset::save_dataset(&args.out, &g)?;
    println!(
        "wrote {} nodes, {} relations, {} features to {}",
        g.num_nodes(),
        g.num_relations(),
        g.num_features(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let g = dataset::load_dataset(&args.dataset)?;
    let config = resolve_config(&args.flags, &g)?;
    let split = resolve_split(&args.dataset, &g, args.split_seed, config.seed)?;
    let load_secs = started.elapsed().as_secs_f64();

    let training = Instant::now();
    let outcome = run_training(&g, &split, &config)?;
    let train_secs = training.elapsed().as_secs_f64();

    let scoring = Instant::now();
    let report = build_report(&g, &split, &config, &outcome.best)?;
    let eval_secs = scoring.elapsed().as_secs_f64();

    let root = rundir::runs_root(args.runs.as_deref());
    let dir = rundir::create_run_dir(&root, "train")?;
    write_run_artifacts(&dir, &split, &config, outcome, &report)?;
    let timings = BTreeMap::from([
        ("load".to_string(), load_secs),
        ("train".to_string(), train_secs),
        ("eval".to_string(), eval_secs),
    ]);
    rundir::write_manifest(&dir, "train", &config, &args.dataset, timings)?;

    println!("{}", dir.display());
    print!("{}", render_report_text(&report));
    Ok(dir)
}

fn write_run_artifacts(
    dir: &Path,
    split: &Split,
    config: &TrainConfig,
    outcome: TrainOutcome,
    report: &mplex_core::eval::EvalReport,
) -> Result<(), CliError> {
    rundir::write_json(dir, "config.json", config)?;
    rundir::write_text(dir, "log.csv", &rundir::log_csv(&outcome.log))?;
    let best = Checkpoint {
        config: config.clone(),
        split_seed: split.seed,
        params: outcome.best,
    };
    checkpoint::save_checkpoint(&dir.join("best.ckpt"), &best)?;
    let last = Checkpoint {
        config: config.clone(),
        split_seed: split.seed,
        params: outcome.last,
    };
    checkpoint::save_checkpoint(&dir.join("last.ckpt"), &last)?;
    rundir::write_text(
        dir,
        "embeddings.tsv",
        &rundir::embeddings_tsv(&best.params.consensus),
    )?;
    rundir::write_json(dir, "report.json", report)?;
    rundir::write_text(dir, "report.txt", &render_report_text(report))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let path = if args.target.is_dir() {
        args.target.join("best.ckpt")
    } else {
        args.target.clone()
    };
    let ckpt = checkpoint::load_checkpoint(&path)?;
    let g = dataset::load_dataset(&args.dataset)?;
    ckpt.check_against(&g)?;
    let split = match dataset::load_split_file(&args.dataset)? {
        Some(split) => split,
        None => make_split(&g, ckpt.split_seed)?,
    };
    let report = build_report(&g, &split, &ckpt.config, &ckpt.params)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    print!("{json}");
    Ok(())
}

/// Labelled config variants an ablation compares, base first.
fn ablation_variants(which: AblateWhich, base: &TrainConfig) -> Vec<(&'static str, TrainConfig)> {
    let zeroed = |f: fn(&mut TrainConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match which {
        AblateWhich::Cross => vec![
            ("full", base.clone()),
            ("no-cross", zeroed(|c| c.coefficients.beta = 0.0)),
        ],
        AblateWhich::Cons => vec![
            ("full", base.clone()),
            ("no-cons", zeroed(|c| c.coefficients.gamma = 0.0)),
        ],
        AblateWhich::ConsCross => vec![
            ("full", base.clone()),
            ("no-cross", zeroed(|c| c.coefficients.beta = 0.0)),
            (
                "no-cons-cross",
                zeroed(|c| {
                    c.coefficients.beta = 0.0;
                    c.coefficients.gamma = 0.0;
                }),
            ),
        ],
        AblateWhich::ClusLearn => vec![
            ("full", base.clone()),
            ("no-clus-learn", zeroed(|c| c.coefficients.zeta_learn = 0.0)),
        ],
        AblateWhich::ClusOrth => vec![
            ("full", base.clone()),
            ("no-clus-orth", zeroed(|c| c.coefficients.zeta_orth = 0.0)),
        ],
        AblateWhich::SummaryMode => vec![
            ("cluster", zeroed(|c| c.summary = SummaryMode::Cluster)),
            ("mean-pool", zeroed(|c| c.summary = SummaryMode::MeanPool)),
        ],
    }
}

/// Median of an unordered sample; even lengths average the middle pair.
fn median(values: &mut Vec<Real>) -> Real {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let g = dataset::load_dataset(&args.dataset)?;
    let base = resolve_config(&args.flags, &g)?;
    let split = resolve_split(&args.dataset, &g, args.split_seed, base.seed)?;

    let mut rows = Vec::new();
    for (label, variant) in ablation_variants(args.which, &base) {
        let mut micro = Vec::with_capacity(args.seeds);
        let mut nmi = Vec::with_capacity(args.seeds);
        for s in 0..args.seeds {
            let mut config = variant.clone();
            config.seed = base.seed + s as u64;
            let outcome = run_training(&g, &split, &config)?;
            let report = build_report(&g, &split, &config, &outcome.best)?;
            micro.push(report.micro_f1);
            nmi.push(report.nmi_n);
        }
        rows.push((label, median(&mut micro), median(&mut nmi)));
    }

    let (_, base_micro, base_nmi) = rows[0];
    println!("variant,micro_f1,nmi_n,delta_micro_f1,delta_nmi_n");
    for (label, micro, nmi) in rows {
        println!(
            "{label},{micro},{nmi},{},{}",
            micro - base_micro,
            nmi - base_nmi
        );
    }
    Ok(())
}

fn cmd_sweep_k(args: SweepKArgs) -> Result<(), CliError> {
    if args.min_k < 2 {
        return Err(CliError::Usage("--min-k must be at least 2".into()));
    }
    if args.max_k < args.min_k {
        return Err(CliError::Usage("--max-k must be at least --min-k".into()));
    }
    let g = dataset::load_dataset(&args.dataset)?;
    let base = resolve_config(&args.flags, &g)?;
    let split = resolve_split(&args.dataset, &g, args.split_seed, base.seed)?;

    println!("k,micro_f1,macro_f1,nmi_n,nmi_c");
    for k in args.min_k..=args.max_k {
        let mut config = base.clone();
        config.clusters = Some(k);
        let outcome = run_training(&g, &split, &config)?;
        let report = build_report(&g, &split, &config, &outcome.best)?;
        println!(
            "{k},{},{},{},{}",
            report.micro_f1, report.macro_f1, report.nmi_n, report.nmi_c
        );
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<(), CliError> {
    let g = dataset::load_dataset(&args.dataset)?;
    let base = resolve_config(&args.flags, &g)?;
    let split = resolve_split(&args.dataset, &g, args.split_seed, base.seed)?;
    let spec = GridSpec {
        gammas: args.gammas,
        zetas: args.zetas,
        thetas: args.thetas,
        learning_rates: args
            .learning_rates
            .unwrap_or_else(|| vec![base.learning_rate]),
    };
    let outcome = grid_search(&g, &split, &base, &spec)?;

    println!("gamma,zeta,theta,learning_rate,val_micro_f1,best_epoch");
    for cell in &outcome.cells {
        let c = &cell.config.coefficients;
        match (cell.val_micro_f1, cell.best_epoch) {
            (Some(v), Some(e)) => println!(
                "{},{},{},{},{v},{e}",
                c.gamma, c.zeta_learn, c.theta, cell.config.learning_rate
            ),
            _ => println!(
                "{},{},{},{},diverged,",
                c.gamma, c.zeta_learn, c.theta, cell.config.learning_rate
            ),
        }
    }
    let best = &outcome.cells[outcome.best_index];
    let c = &best.config.coefficients;
    println!(
        "best: gamma={} zeta={} theta={} learning_rate={} val_micro_f1={}",
        c.gamma,
        c.zeta_learn,
        c.theta,
        best.config.learning_rate,
        best.val_micro_f1.expect("winning cell has a score")
    );
    Ok(())
}
