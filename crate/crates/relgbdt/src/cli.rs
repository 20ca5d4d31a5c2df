//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relgbdt_core::attention::block_names;
use relgbdt_core::boosting::TrainOptions;
use relgbdt_core::schedule::DEFAULT_COVER_COUNT;
use relgbdt_core::tree::ColumnData;
use relgbdt_core::{
    build_schedule, flatten, generate, importance_report, train, AttentionConfig, BoostConfig,
    DatasetInstance, EvalMetric, FeatureColumn, Loss, SynthConfig, TaskKind, TreeConfig,
};

use crate::cv::cross_validate;
use crate::files::{read_instance, read_schema, write_dataset};
use crate::model_file::{load_model, save_model, write_log};

#[derive(Debug, Parser)]
#[command(
    name = "relgbdt",
    version,
    about = "Gradient boosted trees over relational data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with its training log.
    Train(TrainArgs),
    /// Score a model, or cross-validate training parameters with --folds.
    Evaluate(EvaluateArgs),
    /// Generate the synthetic four-table benchmark.
    SynthGen(SynthArgs),
    /// Collapse a relational dataset into a single table.
    Flatten(FlattenArgs),
    /// Minimal-depth variable importance, as `node,column,importance` CSV.
    Importance(ImportanceArgs),
    /// Print the schedule or the per-node feature columns of a schema.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    Binary,
    Multiclass,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Schema JSON document.
    #[arg(long)]
    pub schema: PathBuf,
    /// Directory holding one `<table>.csv` per table.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainParams {
    /// Loss; defaults to the one matching the label task.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub shrinkage: f64,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    /// Fraction of feature columns sampled per tree node.
    #[arg(long, default_value_t = 0.2)]
    pub sampling: f64,
    /// Maximum times a table may repeat along a schedule path.
    #[arg(long, default_value_t = DEFAULT_COVER_COUNT)]
    pub cover: usize,
    /// Restrict hard attention to the child's own attributes.
    #[arg(long)]
    pub no_chain_hard: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainParams {
    fn config(&self, task: TaskKind) -> Result<BoostConfig> {
        let loss = match (self.loss, task) {
            (None, _) => None,
            (Some(LossArg::Mse), TaskKind::Binary | TaskKind::Regression) => Some(Loss::Mse),
            (Some(LossArg::Binary), TaskKind::Binary) => Some(Loss::BinaryLogloss),
            (Some(LossArg::Multiclass), TaskKind::Multiclass) => None,
            (Some(l), t) => bail!("loss {l:?} does not fit a {t:?} label"),
        };
        Ok(BoostConfig {
            loss,
            shrinkage: self.shrinkage,
            iterations: self.iterations,
            tree: TreeConfig {
                max_depth: self.max_depth,
                min_examples_leaf: self.min_leaf,
                feature_sampling_ratio: self.sampling,
                rng_seed: self.seed,
            },
            cover_count: self.cover,
            attention: AttentionConfig {
                chain_hard: !self.no_chain_hard,
            },
            seed: self.seed,
        })
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: TrainParams,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Validation data directory (same schema) scored after every iteration.
    #[arg(long)]
    pub valid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model to score. Required unless --folds is given.
    #[arg(long, required_unless_present = "folds", conflicts_with = "folds")]
    pub model: Option<PathBuf>,
    /// Cross-validate with this many root-row folds instead.
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub params: TrainParams,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long = "n-a", default_value_t = relgbdt_core::synthetic::DEFAULT_N_A)]
    pub n_a: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out-dir", visible_alias = "out")]
    pub out_dir: PathBuf,
    /// Label rows with `max p'' - p` instead of the binary rule.
    #[arg(long)]
    pub regression: bool,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_COVER_COUNT)]
    pub cover: usize,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Print the schedule tree.
    #[arg(long)]
    pub schedule: bool,
    /// Print each node's feature columns, or with --data dump one node's
    /// assembled block as CSV.
    #[arg(long)]
    pub features: bool,
    /// Data directory whose block is dumped.
    #[arg(long, requires = "features")]
    pub data: Option<PathBuf>,
    /// Schedule node to dump; defaults to the root.
    #[arg(long, requires = "data")]
    pub node: Option<String>,
    /// Take child predictions, cover and attention settings from this model
    /// instead of predicting zero.
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    /// Model iteration (0-based) whose trees supply child predictions.
    #[arg(long, requires = "model")]
    pub iteration: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_COVER_COUNT)]
    pub cover: usize,
    #[arg(long)]
    pub no_chain_hard: bool,
}

fn load(data: &DataArgs) -> Result<DatasetInstance> {
    let schema = read_schema(&data.schema)?;
    Ok(read_instance(&schema, &data.data)?)
}

fn warn_issues(instance: &DatasetInstance) {
    for w in instance.warnings() {
        eprintln!("warning: {w}");
    }
}

fn metric_name(m: EvalMetric) -> &'static str {
    match m {
        EvalMetric::Accuracy => "accuracy",
        EvalMetric::Rmse => "rmse",
    }
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".log.csv");
    PathBuf::from(name)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let instance = load(&args.data)?;
    warn_issues(&instance);
    let config = args.params.config(instance.schema().label().task)?;
    let valid = match &args.valid {
        Some(dir) => Some(
            read_instance(instance.schema(), dir)
                .with_context(|| format!("validation data {}", dir.display()))?,
        ),
        None => None,
    };
    let trained = train(
        &instance,
        &config,
        TrainOptions {
            rows: None,
            validation: valid.as_ref().map(|v| (v, None)),
        },
    )?;
    save_model(&trained.model, &args.out)?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| default_log_path(&args.out));
    let mut file = io::BufWriter::new(
        fs::File::create(&log_path).with_context(|| log_path.display().to_string())?,
    );
    write_log(&trained.log, &mut file)?;
    file.flush()?;
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut impl Write) -> Result<()> {
    let instance = load(&args.data)?;
    warn_issues(&instance);
    if let Some(k) = args.folds {
        let config = args.params.config(instance.schema().label().task)?;
        let metric = match config.loss {
            Some(Loss::Mse) => EvalMetric::Rmse,
            Some(_) => EvalMetric::Accuracy,
            None if instance.schema().label().task == TaskKind::Regression => EvalMetric::Rmse,
            None => EvalMetric::Accuracy,
        };
        let summary = cross_validate(&instance, &config, k, args.params.seed)?;
        writeln!(
            out,
            "{} {:.6} ± {:.6} ({k} folds, {} examples)",
            metric_name(metric),
            summary.mean,
            summary.std,
            instance.root_len()
        )?;
        for (i, s) in summary.scores.iter().enumerate() {
            writeln!(out, "fold {i}: {s:.6}")?;
        }
        return Ok(());
    }
    let path = args
        .model
        .as_ref()
        .expect("clap requires --model without --folds");
    let model = load_model(path)?;
    let value = model.evaluate(&instance, None)?;
    writeln!(
        out,
        "{} {value:.6} ({} examples)",
        metric_name(model.metric()),
        instance.root_len()
    )?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if args.n_a == 0 {
        bail!("--n-a must be positive");
    }
    let instance = generate(&SynthConfig {
        n_a: args.n_a,
        seed: args.seed,
        regression: args.regression,
    });
    write_dataset(&instance, &args.out_dir)?;
    Ok(())
}

fn cmd_flatten(args: &FlattenArgs) -> Result<()> {
    if args.cover == 0 {
        bail!("--cover must be positive");
    }
    let instance = load(&args.data)?;
    warn_issues(&instance);
    let schedule = build_schedule(instance.schema(), args.cover);
    let flat = flatten(&instance, &schedule)?;
    write_dataset(&flat, &args.out)?;
    Ok(())
}

fn cmd_importance(args: &ImportanceArgs, out: &mut impl Write) -> Result<()> {
    let model = load_model(&args.model)?;
    let mut text = String::from("node,column,importance\n");
    for row in importance_report(&model) {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record([
            row.node.as_str(),
            row.column.as_str(),
            &row.importance.to_string(),
        ])?;
        text.push_str(std::str::from_utf8(&w.into_inner()?)?);
    }
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| path.display().to_string())?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_inspect(args: &InspectArgs, out: &mut impl Write) -> Result<()> {
    if args.cover == 0 {
        bail!("--cover must be positive");
    }
    let schema = read_schema(&args.schema)?;
    if let Some(dir) = &args.data {
        return dump_block(args, read_instance(&schema, dir)?, out);
    }
    let schedule = build_schedule(&schema, args.cover);
    let show_schedule = args.schedule || !args.features;
    if show_schedule {
        write!(out, "{}", schedule.render(&schema))?;
        for t in schedule.unreachable_tables() {
            writeln!(out, "unreachable: {t}")?;
        }
    }
    if args.features {
        let config = AttentionConfig {
            chain_hard: !args.no_chain_hard,
        };
        for (node, names) in schedule
            .nodes()
            .iter()
            .zip(block_names(&schema, &schedule, &config))
        {
            writeln!(out, "{} ({} columns)", node.id, names.len())?;
            for n in names {
                writeln!(out, "  {n}")?;
            }
        }
    }
    Ok(())
}

fn cell(col: &FeatureColumn, row: usize) -> String {
    match &col.data {
        ColumnData::Numerical(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
        ColumnData::Categorical(v) => v[row].clone().unwrap_or_default(),
    }
}

fn dump_block(args: &InspectArgs, instance: DatasetInstance, out: &mut impl Write) -> Result<()> {
    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => {
            let config = BoostConfig {
                iterations: 0,
                cover_count: args.cover,
                attention: AttentionConfig {
                    chain_hard: !args.no_chain_hard,
                },
                ..BoostConfig::default()
            };
            train(&instance, &config, TrainOptions::default())?.model
        }
    };
    let iteration = args
        .iteration
        .unwrap_or(model.iterations.len().saturating_sub(1));
    if args.iteration.is_some() && iteration >= model.iterations.len() {
        bail!("model has {} iterations", model.iterations.len());
    }
    let node = match &args.node {
        Some(id) => model
            .schedule
            .node_index(id)
            .with_context(|| format!("unknown schedule node {id:?}"))?,
        None => model.schedule.root(),
    };
    let (plan, blocks) = model.feature_blocks(&instance, None, iteration)?;
    let block = &blocks[node];
    let table = model.schedule.node(node).table;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id"];
    header.extend(block.names());
    w.write_record(&header)?;
    for (local, &row) in plan.rows(node).iter().enumerate() {
        let mut record = vec![instance.row_id(table, row).to_string()];
        record.extend(block.columns.iter().map(|c| cell(c, local)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::SynthGen(a) => cmd_synth(a),
        Command::Flatten(a) => cmd_flatten(a),
        Command::Importance(a) => cmd_importance(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
    }
}
