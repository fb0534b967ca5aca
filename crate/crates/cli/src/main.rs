use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attentive::bench::{run_benchmark, run_reflection_mc, run_training, sweep, ReflectionParams, SweepParam, SweepRow};
use attentive::data::{generate_synthetic, load_dataset, save_dataset, ParseOptions, SynthKind, SynthSpec};
use attentive::{Dataset, EvalOrder, FilterConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "attn", version, about = "Attentive Perceptron experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset in sparse text format.
    Synth(SynthArgs),
    /// Train one model and write its run report.
    Train(TrainArgs),
    /// Train baseline and attentive models on the same stream and report both.
    Bench(BenchArgs),
    /// Run one paired benchmark per parameter value.
    #[command(long_about = SWEEP_HELP)]
    Sweep(SweepArgs),
    /// Monte Carlo check of the stopping rule on symmetric random walks.
    Reflect(ReflectArgs),
}

const SWEEP_HELP: &str = "Run one paired benchmark per parameter value.

The CSV has one row per value with these columns, in order:
param, value, updates, filtered, decision_errors, features_evaluated,
features_available, train_mistakes, test_accuracy, filtered_test_accuracy,
mean_features_per_example, speedup_ratio, realized_delta, baseline_updates,
baseline_features_evaluated, baseline_test_accuracy.
All metrics except the baseline_* columns describe the attentive run.";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    GaussianSep,
    GaussianNoisy,
    Walk,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Number of training examples.
    #[arg(long)]
    n: usize,
    /// Number of features (bias excluded).
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Label flip probability (gaussian-noisy only).
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Extra examples drawn from the same teacher and written to --test-out.
    #[arg(long, default_value_t = 0, requires = "test_out")]
    n_test: usize,
    #[arg(long)]
    test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Order {
    Natural,
    Shuffle,
    Wmag,
}

impl From<Order> for EvalOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Natural => EvalOrder::NaturalIndex,
            Order::Shuffle => EvalOrder::SeededShuffle,
            Order::Wmag => EvalOrder::WeightMagnitudeDesc,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Training data (sparse text, optionally .gz).
    #[arg(long)]
    data: PathBuf,
    /// Test data.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Prediction-time delta; defaults to --delta.
    #[arg(long)]
    predict_delta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 100)]
    warmup: u64,
    #[arg(long, default_value_t = 0.99)]
    decay: f64,
    #[arg(long, default_value_t = 1e-9)]
    min_std: f64,
    #[arg(long, value_enum, default_value_t = Order::Shuffle)]
    order: Order,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale each example's features to unit norm.
    #[arg(long)]
    l2norm: bool,
    /// Accept 0/1 labels, reading 0 as -1.
    #[arg(long)]
    map01: bool,
}

impl RunArgs {
    fn config(&self, enabled: bool) -> Result<FilterConfig, CliError> {
        let cfg = FilterConfig {
            delta: self.delta,
            theta: self.theta,
            stride: self.stride,
            warmup: self.warmup,
            decay: self.decay,
            min_std: self.min_std,
            order: self.order.into(),
            seed: self.seed,
            enabled,
            predict_delta: self.predict_delta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn datasets(&self) -> Result<(Dataset, Dataset), CliError> {
        let opts = ParseOptions { map01: self.map01, l2norm: self.l2norm };
        Ok((load_dataset(&self.data, opts)?, load_dataset(&self.test, opts)?))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algo {
    Baseline,
    Attentive,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Algo::Attentive)]
    algo: Algo,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Param {
    Delta,
    Stride,
    Order,
    Warmup,
}

impl From<Param> for SweepParam {
    fn from(p: Param) -> Self {
        match p {
            Param::Delta => SweepParam::Delta,
            Param::Stride => SweepParam::Stride,
            Param::Order => SweepParam::Order,
            Param::Warmup => SweepParam::Warmup,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    param: Param,
    /// Comma-separated values, e.g. 0.01,0.05,0.1 or natural,shuffle,wmag.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReflectArgs {
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 100_000)]
    walks: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scan without stopping (the error rate is then 0).
    #[arg(long)]
    no_filter: bool,
}

#[derive(Debug)]
enum CliError {
    Core(attentive::Error),
    Io(PathBuf, io::Error),
    Output(String),
}

impl From<attentive::Error> for CliError {
    fn from(e: attentive::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 4,
            CliError::Io(..) | CliError::Output(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Output(m) => f.write_str(m),
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(p.to_path_buf(), e))?))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::Io(path.unwrap_or(Path::new("-")).into(), e))
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let kind = match args.kind {
        Kind::GaussianSep => SynthKind::GaussianSeparable,
        Kind::GaussianNoisy => SynthKind::GaussianNoisy,
        Kind::Walk => SynthKind::RandomWalkTerms,
    };
    let spec = SynthSpec {
        kind,
        n_examples: args.n + args.n_test,
        n_features: args.d,
        margin: args.margin,
        flip_prob: args.flip,
        seed: args.seed,
    };
    let ds: Dataset = generate_synthetic(&spec)?;
    let (train, test) = ds.split(args.n);
    save_dataset(&train, &args.out)?;
    if let Some(path) = &args.test_out {
        save_dataset(&test, path)?;
    }
    eprintln!("wrote {} training and {} test examples", train.len(), test.len());
    Ok(())
}

fn train(args: &TrainArgs) -> Result<(), CliError> {
    let (train, test) = args.run.datasets()?;
    let (name, enabled) = match args.algo {
        Algo::Baseline => ("baseline", false),
        Algo::Attentive => ("attentive", true),
    };
    let cfg = args.run.config(enabled)?;
    let report = run_training(name, &train, &test, &cfg, args.run.epochs, args.run.seed)?;
    let s = &report.summary;
    eprintln!(
        "{name}: test accuracy {:.4}, {:.1} features/example, speedup {:.2}x, realized delta {:.4}",
        s.test_accuracy, s.mean_features_per_example, s.speedup_ratio, s.realized_delta
    );
    write_json(&report, args.report.as_deref())
}

fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let (train, test) = args.run.datasets()?;
    let cfg = args.run.config(true)?;
    let report = run_benchmark(&train, &test, &cfg, args.run.epochs, args.run.seed)?;
    let (b, a) = (&report.baseline.summary, &report.attentive.summary);
    eprintln!(
        "baseline accuracy {:.4} | attentive accuracy {:.4}, speedup {:.2}x, filtered {}, realized delta {:.4}",
        b.test_accuracy, a.test_accuracy, a.speedup_ratio, a.filtered, a.realized_delta
    );
    write_json(&report, args.report.as_deref())
}

fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let (train, test) = args.run.datasets()?;
    let base = args.run.config(true)?;
    let rows: Vec<SweepRow> = sweep(args.param.into(), &args.values, &base, &train, &test, args.run.epochs, args.run.seed)?;
    let out = open_output(args.csv.as_deref())?;
    let mut w = csv::Writer::from_writer(out);
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(args.csv.clone().unwrap_or_else(|| "-".into()), e))
}

fn reflect(args: &ReflectArgs) -> Result<(), CliError> {
    let report = run_reflection_mc(&ReflectionParams {
        steps: args.steps,
        walks: args.walks,
        delta: args.delta,
        theta: args.theta,
        seed: args.seed,
        filtering: !args.no_filter,
    })?;
    write_json(&report, None)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Reflect(a) => reflect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("attn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
