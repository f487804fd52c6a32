mod config;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use transc_core::checkpoint::{load_checkpoint, read_json, save_checkpoint, save_json, Checkpoint};
use transc_core::dataset::{build_m_extension, build_subset, split, HeldOut, RawExport, SplitRequest};
use transc_core::eval::{
    classification_negatives, evaluate_classification, fit_thresholds, link_prediction, ranks_csv, EvalReport,
    ThresholdTable,
};
use transc_core::geometry::{EmbeddingSpace, ModelKind};
use transc_core::inference::{infer_instance_of, infer_sub_class_of, to_tsv};
use transc_core::kg::{load_kg, load_triple_files, save_kg, save_triple_files, KnowledgeGraph, SplitName, TripleSet};
use transc_core::sampling::{PoolMode, SamplingStrategy};
use transc_core::synthetic::{experiment_config, generate, run_experiment, ToyConfig};
use transc_core::training::{TrainConfig, TrainState, Trainer};

use config::{pick, FileConfig};

const DATA_ENV: &str = "TRANSC_DATA";
const NEGATIVE_SUFFIX: &str = "_neg";

/// Bad flags or config values.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "transc", version, about = "Train and evaluate concept-sphere knowledge graph embeddings")]
struct Cli {
    /// TOML file whose keys mirror the long flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 keeps every output deterministic
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root seed for every random stream
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArg {
    /// Dataset directory (falls back to the config file, then $TRANSC_DATA)
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct OutArg {
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a dataset from raw TSV exports and split it
    BuildDataset {
        /// Directory with relational.tsv, instanceOf.tsv and subClassOf.tsv
        #[arg(long)]
        raw: PathBuf,
        /// Relational triples to sample (default: all)
        #[arg(long)]
        sample: Option<usize>,
        /// train,valid,test weights
        #[arg(long, conflicts_with = "counts")]
        ratios: Option<String>,
        /// Held-out counts: rel-valid,rel-test,inst-valid,inst-test,sub-valid,sub-test
        #[arg(long)]
        counts: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Extend valid/test with one transitivity hop and write balanced negatives
    ExtendM {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArg,
        /// Iterate to a fixpoint instead of one hop
        #[arg(long)]
        closure: bool,
        /// Candidate pool for negatives: typed or uniform
        #[arg(long)]
        pool: Option<String>,
    },
    /// Train an embedding and write a checkpoint directory
    Train(TrainArgs),
    /// Fit classification thresholds on the valid split
    FitThresholds {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Link prediction (MRR, Hits@N) on relational triples
    EvalLp {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArg,
        /// Split to rank: valid or test
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Triple classification on the test split
    EvalTc {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArg,
        /// Thresholds written by fit-thresholds
        #[arg(long)]
        thresholds: PathBuf,
    },
    /// List unknown isA facts implied by the geometry
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArg,
        /// Required containment depth
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Link prediction plus classification, as JSON and a text table
    Report {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Write the synthetic three-level concept tree as a dataset
    GenToy {
        #[command(flatten)]
        out: OutArg,
    },
    /// Train both models on the synthetic tree and compare isA classification
    ToyExperiment {
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArg,
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Margin for relational triples
    #[arg(long)]
    margin_l: Option<f64>,
    /// Margin for instanceOf triples
    #[arg(long)]
    margin_e: Option<f64>,
    /// Margin for subClassOf triples
    #[arg(long)]
    margin_c: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// unif or bern
    #[arg(long)]
    sampling: Option<String>,
    /// typed or uniform
    #[arg(long)]
    pool: Option<String>,
    /// transc or transe
    #[arg(long)]
    model: Option<String>,
    /// Also write the checkpoint every N epochs
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Continue from the checkpoint already in --out
    #[arg(long)]
    resume: bool,
}

struct Ctx {
    file: FileConfig,
    threads: usize,
    seed: u64,
}

impl Ctx {
    fn data(&self, arg: &DataArg) -> Result<PathBuf> {
        arg.data
            .clone()
            .or_else(|| self.file.data.clone())
            .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
            .ok_or_else(|| usage(format!("no dataset: pass --data, set `data` in --config or ${DATA_ENV}")))
    }

    fn out(&self, arg: &OutArg) -> Result<PathBuf> {
        let out = arg.out.clone().or_else(|| self.file.out.clone()).ok_or_else(|| usage("--out is required"))?;
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(out)
    }

    fn optional_out(&self, arg: &OutArg) -> Result<Option<PathBuf>> {
        if arg.out.is_none() && self.file.out.is_none() {
            return Ok(None);
        }
        self.out(arg).map(Some)
    }
}

fn parse_named<T: std::str::FromStr<Err = String>>(flag: Option<String>, file: Option<String>) -> Result<Option<T>> {
    flag.or(file).map(|s| s.parse::<T>().map_err(usage)).transpose()
}

fn parse_list<T: std::str::FromStr>(s: &str, len: usize, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(|x| x.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--{what}: expected {len} comma-separated numbers, got {s:?}")))?;
    if items.len() != len {
        return Err(usage(format!("--{what}: expected {len} values, got {}", items.len())));
    }
    Ok(items)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_model(dir: &Path, kg: &KnowledgeGraph) -> Result<Checkpoint> {
    let ck = load_checkpoint(dir)?;
    let s = &ck.space;
    if s.num_instances() != kg.num_instances() || s.num_concepts() != kg.num_concepts() || s.num_relations() != kg.num_relations() {
        return Err(transc_core::Error::Checkpoint {
            path: dir.to_owned(),
            message: format!(
                "sized for {} instances / {} concepts / {} relations, dataset has {} / {} / {}",
                s.num_instances(),
                s.num_concepts(),
                s.num_relations(),
                kg.num_instances(),
                kg.num_concepts(),
                kg.num_relations()
            ),
        }
        .into());
    }
    Ok(ck)
}

/// Persisted negatives for a split, or freshly generated ones.
fn negatives_for(ctx: &Ctx, dir: &Path, kg: &KnowledgeGraph, split: SplitName) -> Result<TripleSet> {
    if let Some(set) = load_triple_files(dir, kg, split, NEGATIVE_SUFFIX)? {
        return Ok(set);
    }
    log::warn!("no {} negatives in {}; generating them from seed {}", split.as_str(), dir.display(), ctx.seed);
    Ok(classification_negatives(kg, kg.split(split), ctx.seed, split.as_str(), PoolMode::Typed)?)
}

fn train_config(ctx: &Ctx, a: &TrainArgs) -> Result<TrainConfig> {
    let f = &ctx.file;
    let d = TrainConfig::default();
    let config = TrainConfig {
        dim: pick(a.dim, f.dim, d.dim),
        learning_rate: pick(a.lr, f.lr, d.learning_rate),
        margin_relational: pick(a.margin_l, f.margin_l, d.margin_relational),
        margin_instance_of: pick(a.margin_e, f.margin_e, d.margin_instance_of),
        margin_sub_class_of: pick(a.margin_c, f.margin_c, d.margin_sub_class_of),
        sampling: parse_named::<SamplingStrategy>(a.sampling.clone(), f.sampling.clone())?.unwrap_or(d.sampling),
        pool: parse_named::<PoolMode>(a.pool.clone(), f.pool.clone())?.unwrap_or(d.pool),
        epochs: pick(a.epochs, f.epochs, d.epochs),
        batch_size: pick(a.batch_size, f.batch_size, d.batch_size),
        seed: ctx.seed,
        model: parse_named::<ModelKind>(a.model.clone(), f.model.clone())?.unwrap_or(d.model),
        threads: ctx.threads,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let config = train_config(ctx, a)?;
    let kg = load_kg(ctx.data(&a.data)?)?;
    let out = ctx.out(&a.out)?;
    let every = pick(a.checkpoint_every, ctx.file.checkpoint_every, 0);
    let mut trainer = if a.resume {
        let ck = load_model(&out, &kg)?;
        let trace = ck.trace.unwrap_or_else(|| transc_core::checkpoint::TrainTrace { epochs_completed: 0, losses: vec![] });
        log::info!("resuming from epoch {}", trace.epochs_completed);
        let state = TrainState { space: ck.space, epoch: trace.epochs_completed, losses: trace.losses };
        Trainer::resume(&kg, config.clone(), state)?
    } else {
        Trainer::new(&kg, config.clone())?
    };
    let log_every = (config.epochs / 20).max(1);
    while trainer.state().epoch < config.epochs {
        let loss = trainer.run_epoch()?;
        let epoch = trainer.state().epoch;
        if epoch % log_every == 0 || epoch == config.epochs {
            log::info!(
                "epoch {epoch}/{} loss {:.4} (instanceOf {:.4}, subClassOf {:.4}, relational {:.4})",
                config.epochs,
                loss.total(),
                loss.instance_of,
                loss.sub_class_of,
                loss.relational
            );
        }
        if every > 0 && epoch % every == 0 {
            save_checkpoint(&out, trainer.state(), &config)?;
        }
    }
    save_checkpoint(&out, trainer.state(), &config)?;
    print_json(&config)
}

fn cmd_build_dataset(ctx: &Ctx, raw: &Path, sample: Option<usize>, ratios: Option<&str>, counts: Option<&str>, out: &OutArg) -> Result<()> {
    let out = ctx.out(out)?;
    let raw = RawExport::load(raw)?;
    let available = raw.relational.iter().collect::<BTreeSet<_>>().len();
    let subset = build_subset(&raw, sample.unwrap_or(available), ctx.seed)?;
    let request = match (ratios, counts) {
        (_, Some(c)) => {
            let v: Vec<usize> = parse_list(c, 6, "counts")?;
            SplitRequest::Counts([0, 1, 2].map(|k| HeldOut { valid: v[2 * k], test: v[2 * k + 1] }))
        }
        (Some(r), None) => {
            let v: Vec<f64> = parse_list(r, 3, "ratios")?;
            SplitRequest::Ratios([v[0], v[1], v[2]])
        }
        (None, None) => SplitRequest::Ratios([0.8, 0.1, 0.1]),
    };
    let (kg, report) = split(&subset, &request, ctx.seed)?;
    save_kg(&kg, &out)?;
    save_json(out.join("split_report.json"), &report)?;
    if report.forced > 0 {
        log::warn!("{} held-out triples left an entity without training triples", report.forced);
    }
    print_json(&report)
}

fn cmd_extend_m(ctx: &Ctx, data: &DataArg, out: &OutArg, closure: bool, pool: Option<String>) -> Result<()> {
    let pool = parse_named::<PoolMode>(pool, ctx.file.pool.clone())?.unwrap_or_default();
    let kg = load_kg(ctx.data(data)?)?;
    let out = ctx.out(out)?;
    let (ext, report) = build_m_extension(&kg, closure);
    save_kg(&ext, &out)?;
    for split in [SplitName::Valid, SplitName::Test] {
        let neg = classification_negatives(&ext, ext.split(split), ctx.seed, split.as_str(), pool)?;
        save_triple_files(&out, &neg, split, NEGATIVE_SUFFIX)?;
    }
    save_json(out.join("m_extension.json"), &report)?;
    print_json(&report)
}

fn cmd_fit_thresholds(ctx: &Ctx, checkpoint: &Path, data: &DataArg, out: &OutArg) -> Result<()> {
    let dir = ctx.data(data)?;
    let kg = load_kg(&dir)?;
    let ck = load_model(checkpoint, &kg)?;
    let out = ctx.out(out)?;
    let neg = negatives_for(ctx, &dir, &kg, SplitName::Valid)?;
    let table = fit_thresholds(&ck.space, &kg, kg.valid(), &neg);
    for name in EvalReport::fallbacks(&table, &kg) {
        log::warn!("no validation triples for {name}; using the global median score");
    }
    save_json(out.join("thresholds.json"), &table)?;
    print_json(&table)
}

fn split_name(s: &str) -> Result<SplitName> {
    match s {
        "valid" => Ok(SplitName::Valid),
        "test" => Ok(SplitName::Test),
        other => Err(usage(format!("--split must be valid or test, got {other:?}"))),
    }
}

fn write_report(out: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    save_json(out.join(format!("{stem}.json")), report)?;
    write_text(&out.join(format!("{stem}.txt")), &report.to_string())
}

fn cmd_eval_lp(ctx: &Ctx, checkpoint: &Path, data: &DataArg, out: &OutArg, split: &str) -> Result<()> {
    let split = split_name(split)?;
    let kg = load_kg(ctx.data(data)?)?;
    let ck = load_model(checkpoint, &kg)?;
    let (lp, ranks) = link_prediction(&ck.space, &kg, &kg.split(split).relational, ctx.threads)?;
    let report = EvalReport { link_prediction: Some(lp), classification: None, fallback_thresholds: vec![] };
    if let Some(out) = ctx.optional_out(out)? {
        write_report(&out, "link_prediction", &report)?;
        write_text(&out.join("ranks.csv"), &ranks_csv(&ranks))?;
    }
    print_json(&report)
}

fn classification_report(ctx: &Ctx, dir: &Path, kg: &KnowledgeGraph, space: &EmbeddingSpace, table: &ThresholdTable) -> Result<EvalReport> {
    if table.relational.len() != kg.num_relations() {
        return Err(usage(format!(
            "thresholds cover {} relations but the dataset has {}",
            table.relational.len(),
            kg.num_relations()
        )));
    }
    let neg = negatives_for(ctx, dir, kg, SplitName::Test)?;
    Ok(EvalReport {
        link_prediction: None,
        classification: Some(evaluate_classification(space, table, kg.test(), &neg)),
        fallback_thresholds: EvalReport::fallbacks(table, kg),
    })
}

fn cmd_eval_tc(ctx: &Ctx, checkpoint: &Path, data: &DataArg, out: &OutArg, thresholds: &Path) -> Result<()> {
    let dir = ctx.data(data)?;
    let kg = load_kg(&dir)?;
    let ck = load_model(checkpoint, &kg)?;
    let table: ThresholdTable = read_json(thresholds)?;
    let report = classification_report(ctx, &dir, &kg, &ck.space, &table)?;
    if let Some(out) = ctx.optional_out(out)? {
        write_report(&out, "classification", &report)?;
    }
    print_json(&report)
}

fn cmd_infer(ctx: &Ctx, checkpoint: &Path, data: &DataArg, out: &OutArg, slack: Option<f64>) -> Result<()> {
    let slack = pick(slack, ctx.file.slack, 0.0);
    if !(slack >= 0.0) {
        return Err(usage(format!("--slack must be non-negative, got {slack}")));
    }
    let kg = load_kg(ctx.data(data)?)?;
    let ck = load_model(checkpoint, &kg)?;
    let out = ctx.out(out)?;
    let inst = infer_instance_of(&ck.space, &kg, slack, ctx.threads);
    let sub = infer_sub_class_of(&ck.space, &kg, slack, ctx.threads);
    write_text(&out.join("inferred_instanceOf.tsv"), &to_tsv(&inst, kg.instances(), kg.concepts()))?;
    write_text(&out.join("inferred_subClassOf.tsv"), &to_tsv(&sub, kg.concepts(), kg.concepts()))?;
    #[derive(Serialize)]
    struct Counts {
        instance_of: usize,
        sub_class_of: usize,
    }
    print_json(&Counts { instance_of: inst.len(), sub_class_of: sub.len() })
}

fn cmd_report(ctx: &Ctx, checkpoint: &Path, data: &DataArg, out: &OutArg) -> Result<()> {
    let dir = ctx.data(data)?;
    let kg = load_kg(&dir)?;
    let ck = load_model(checkpoint, &kg)?;
    let out = ctx.out(out)?;
    let valid_neg = negatives_for(ctx, &dir, &kg, SplitName::Valid)?;
    let table = fit_thresholds(&ck.space, &kg, kg.valid(), &valid_neg);
    let mut report = classification_report(ctx, &dir, &kg, &ck.space, &table)?;
    if !kg.test().relational.is_empty() {
        let (lp, ranks) = link_prediction(&ck.space, &kg, &kg.test().relational, ctx.threads)?;
        report.link_prediction = Some(lp);
        write_text(&out.join("ranks.csv"), &ranks_csv(&ranks))?;
    }
    save_json(out.join("thresholds.json"), &table)?;
    write_report(&out, "report", &report)?;
    emit(&report.to_string())
}

fn cmd_gen_toy(ctx: &Ctx, out: &OutArg) -> Result<()> {
    let out = ctx.out(out)?;
    let toy = generate(&ToyConfig { seed: ctx.seed, ..ToyConfig::default() });
    save_kg(&toy.kg, &out)?;
    log::info!("wrote {} triples to {}", toy.kg.train().len() + toy.kg.valid().len() + toy.kg.test().len(), out.display());
    Ok(())
}

fn cmd_toy_experiment(ctx: &Ctx, out: &OutArg) -> Result<()> {
    let out = ctx.out(out)?;
    let toy = generate(&ToyConfig { seed: ctx.seed, ..ToyConfig::default() });
    let mut outcomes = Vec::new();
    for model in [ModelKind::TransC, ModelKind::TransE] {
        let config = experiment_config(model, ctx.seed);
        outcomes.push(run_experiment(&toy, &config)?);
    }
    save_json(out.join("toy_experiment.json"), &outcomes)?;
    for o in &outcomes {
        emit(&format!(
            "{:<7} instanceOf {:5.1}%  subClassOf {:5.1}%  isA {:5.1}%\n",
            o.model.as_str(),
            o.instance_of.accuracy,
            o.sub_class_of.accuracy,
            o.pooled_accuracy
        ))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        threads: pick(cli.threads, file.threads, 1),
        seed: pick(cli.seed, file.seed, 42),
        file,
    };
    if ctx.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    match &cli.command {
        Command::BuildDataset { raw, sample, ratios, counts, out } => {
            cmd_build_dataset(&ctx, raw, *sample, ratios.as_deref(), counts.as_deref(), out)
        }
        Command::ExtendM { data, out, closure, pool } => cmd_extend_m(&ctx, data, out, *closure, pool.clone()),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::FitThresholds { checkpoint, data, out } => cmd_fit_thresholds(&ctx, checkpoint, data, out),
        Command::EvalLp { checkpoint, data, out, split } => cmd_eval_lp(&ctx, checkpoint, data, out, split),
        Command::EvalTc { checkpoint, data, out, thresholds } => cmd_eval_tc(&ctx, checkpoint, data, out, thresholds),
        Command::Infer { checkpoint, data, out, slack } => cmd_infer(&ctx, checkpoint, data, out, *slack),
        Command::Report { checkpoint, data, out } => cmd_report(&ctx, checkpoint, data, out),
        Command::GenToy { out } => cmd_gen_toy(&ctx, out),
        Command::ToyExperiment { out } => cmd_toy_experiment(&ctx, out),
    }
}

/// 1 for usage and configuration problems, 3 for numerical aborts, 2 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<transc_core::Error>() {
            return match e {
                e if e.is_numerical() => 3,
                transc_core::Error::Config(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

/// The error chain, skipping causes whose text an outer message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
