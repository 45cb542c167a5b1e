//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input or usage, 2 for runtime
//! failures (I/O, persistence, numerical breakdown).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::attribution::DEFAULT_TOP_K;
use crate::bessel::BesselZeroTable;
use crate::dataio::{load_jsonl, load_queries_jsonl, stratified_split, write_jsonl};
use crate::detector::{evaluate, predict, train, write_csv, TrainingConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::{load, save, DEFAULT_LEARNING_RATE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "demasq",
    version,
    about = "Energy-based detector for machine-generated text embeddings"
)]
struct Cli {
    /// Run per-sample work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a labelled JSONL file, holding out a stratified test split.
    Train(TrainArgs),
    /// Score a labelled JSONL file and print TPR/TNR per domain.
    Evaluate(EvaluateArgs),
    /// Label unlabelled embeddings.
    Classify(ClassifyArgs),
    /// Print zeros of J0 and their ratios to the first as CSV.
    Zeros(ZerosArgs),
}

#[derive(Debug, Args)]
struct InferenceArgs {
    /// Features perturbed per sample.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    k: usize,
    /// Integrated Gradients path steps.
    #[arg(long, default_value_t = 64)]
    ig_steps: usize,
    /// Use the bare variance as the medium speed.
    #[arg(long)]
    no_fundamental_factor: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each label assigned to training.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Average perturbed energies without the unperturbed embedding.
    #[arg(long)]
    exclude_original: bool,
    /// Write the held-out records as JSONL.
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Per-sample CSV of predictions and signed energies.
    #[arg(long)]
    energies_out: PathBuf,
    /// Probability at or above which a sample is called human.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSONL with `id` and `embedding`; labels are ignored.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Debug, Args)]
struct ZerosArgs {
    #[arg(long)]
    max_order: usize,
}

impl InferenceArgs {
    fn config(&self, threshold: f64) -> TrainingConfig {
        TrainingConfig {
            k_features: self.k,
            ig_steps: self.ig_steps,
            medium_includes_fundamental: !self.no_fundamental_factor,
            threshold,
            ..TrainingConfig::default()
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing to the
/// process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match dispatch(cli.command, exec, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(command: Command, exec: Execution, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(args) => run_train(args, exec, out),
        Command::Evaluate(args) => run_evaluate(args, exec, out),
        Command::Classify(args) => run_classify(args, exec, out),
        Command::Zeros(args) => run_zeros(args, out),
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_train(args: TrainArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let cfg = TrainingConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        split_ratio: args.split,
        include_original_in_energy_mean: !args.exclude_original,
        ..args.inference.config(0.5)
    };
    let records = load_jsonl(&args.data)?;
    if records.is_empty() {
        return Err(Error::Config(format!(
            "{} holds no records",
            args.data.display()
        )));
    }
    cfg.validate(records[0].embedding.len())?;
    let split = stratified_split(&records, cfg.split_ratio, cfg.seed)?;
    if let Some(path) = &args.test_out {
        write_jsonl(path, &split.test)?;
    }
    let model = train(&split.train, &cfg, exec)?;
    save(&model.params, &model.optimizer, &args.out)?;
    write!(out, "{}", model.log)?;
    if !split.test.is_empty() {
        let evaluation = evaluate(&model.params, &split.test, &cfg, exec)?;
        writeln!(out, "held-out {} samples", split.test.len())?;
        write!(out, "{}", evaluation.table())?;
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let cfg = args.inference.config(args.threshold);
    let (params, _) = load(&args.model)?;
    let records = load_jsonl(&args.data)?;
    let evaluation = evaluate(&params, &records, &cfg, exec)?;
    evaluation.write_energy_csv(create(&args.energies_out)?)?;
    write!(out, "{}", evaluation.table())?;
    Ok(())
}

fn run_classify(args: ClassifyArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let cfg = args.inference.config(args.threshold);
    let (params, _) = load(&args.model)?;
    let queries = load_queries_jsonl(&args.input)?;
    let rows = predict(&params, &queries, &cfg, exec)?;
    write_csv(create(&args.out)?, &rows)?;
    writeln!(out, "classified {} samples", rows.len())?;
    Ok(())
}

fn run_zeros(args: ZerosArgs, out: &mut dyn Write) -> Result<()> {
    if args.max_order == 0 {
        return Err(Error::domain("--max-order must be at least 1"));
    }
    let table = BesselZeroTable::build(args.max_order)?;
    let first = table.fundamental();
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["n", "zero", "ratio"])?;
    for (i, &zero) in table.zeros().iter().enumerate() {
        writer.write_record([
            (i + 1).to_string(),
            zero.to_string(),
            (zero / first).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
