use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use chessvec::counts::Scheme;
use chessvec::factor::{NmfOptions, Preprocessing};
use chessvec::pipeline::{
    self, CountsStage, IngestStage, InputFormat, NmfStage, PcaStage, PipelineError, PredictStage, ReportKind,
    ReportStage, RunConfig, SelfplayStage, SplitStage, SweepStage,
};
use chessvec::predict::{SplitMode, SweepConfig};
use chessvec::selfplay::DEFAULT_MAX_PLIES;
use chessvec::uci::{self, EngineConfig, SearchLimit, BUILTIN_RANDOM};
use chessvec::zobrist::DEFAULT_SEED;

/// Piece embeddings from move-count matrix factorization.
#[derive(Parser)]
#[command(name = "chessvec", version)]
struct Cli {
    /// Worker thread cap (all cores by default).
    #[arg(long, global = true, env = "CHESSVEC_JOBS")]
    jobs: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play engine games into a move log.
    Selfplay(SelfplayArgs),
    /// Read PGN or a move log, keep white wins, optionally annotate buckets.
    Ingest(IngestArgs),
    /// Split a dataset into train and test logs by game.
    Split(SplitArgs),
    /// Count (row, move) pairs into a counts file.
    Counts(CountsArgs),
    /// Fit PCA and print cumulative explained variance.
    Pca(PcaArgs),
    /// Fit NMF.
    Nmf(NmfArgs),
    /// Score an NMF model on test games.
    Predict(PredictArgs),
    /// Annotate, count, fit and evaluate for several bucket counts.
    Sweep(SweepArgs),
    /// Render top moves, scores, variance or accuracy tables.
    Report(ReportArgs),
    /// Run a saved stage configuration (JSON).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay a run manifest and compare output digests.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Write outputs here instead of over the recorded paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Serve the built-in random mover over UCI on stdin/stdout.
    #[command(hide = true)]
    StubEngine {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SelfplayArgs {
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    /// Engine executable, or `builtin:random`.
    #[arg(long, env = "CHESSVEC_ENGINE", default_value = BUILTIN_RANDOM)]
    engine: String,
    /// Black's engine; the white engine by default.
    #[arg(long)]
    black_engine: Option<String>,
    /// Extra argument for the engine process (repeatable).
    #[arg(long = "engine-arg", allow_hyphen_values = true)]
    engine_args: Vec<String>,
    /// UCI option NAME=VALUE (repeatable).
    #[arg(long = "option", value_parser = parse_option)]
    options: Vec<(String, String)>,
    #[arg(long, conflicts_with = "depth")]
    movetime: Option<u64>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 100)]
    games: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_PLIES)]
    max_plies: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "CHESSVEC_ZOBRIST_SEED", default_value_t = DEFAULT_SEED)]
    zobrist_seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    /// `mlog` or `pgn`; inferred from the extension by default.
    #[arg(long)]
    format: Option<InputFormat>,
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    /// Annotate every move with its bucket for this many buckets.
    #[arg(long)]
    buckets: Option<u32>,
    #[arg(long, env = "CHESSVEC_ZOBRIST_SEED", default_value_t = DEFAULT_SEED)]
    zobrist_seed: u64,
    /// Skip PGN games that fail to parse.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
}

#[derive(Args)]
struct CountsArgs {
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    /// per-type, per-piece or piece-bucket.
    #[arg(long, default_value = "per-piece")]
    scheme: Scheme,
}

#[derive(Args)]
struct PcaArgs {
    /// Counts file or dataset move log.
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long, default_value_t = 5)]
    d: usize,
}

#[derive(Args)]
struct NmfArgs {
    /// Counts file or dataset move log.
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// raw-counts or row-normalized.
    #[arg(long, default_value = "row-normalized")]
    preprocessing: Preprocessing,
    #[command(flatten)]
    nmf: NmfArgsCommon,
}

#[derive(Args)]
struct NmfArgsCommon {
    #[arg(long, default_value_t = NmfOptions::default().d)]
    d: usize,
    #[arg(long, default_value_t = NmfOptions::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = NmfOptions::default().rel_tol)]
    rel_tol: f64,
    /// Seed for the factor initialization.
    #[arg(long, default_value_t = NmfOptions::default().seed)]
    nmf_seed: u64,
}

impl NmfArgsCommon {
    fn options(&self) -> NmfOptions {
        NmfOptions { d: self.d, max_iters: self.max_iters, rel_tol: self.rel_tol, seed: self.nmf_seed }
    }
}

#[derive(Args)]
struct PredictArgs {
    /// Test games (move log).
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    /// Restrict the argmax to legal moves.
    #[arg(long)]
    legal_only: bool,
    /// Label for the report row.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    #[arg(short, long, env = "CHESSVEC_OUTPUT")]
    output: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 16, 256])]
    buckets: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64])]
    split_seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// by-game or by-move.
    #[arg(long, default_value = "by-game")]
    split_mode: SplitMode,
    #[arg(long, default_value = "row-normalized")]
    preprocessing: Preprocessing,
    #[arg(long)]
    legal_only: bool,
    /// Hash with this seed instead of the dataset's.
    #[arg(long, env = "CHESSVEC_ZOBRIST_SEED")]
    zobrist_seed: Option<u64>,
    #[command(flatten)]
    nmf: NmfArgsCommon,
}

#[derive(Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["top_moves", "scores", "variance", "accuracy"])))]
struct ReportArgs {
    /// Model file, or an evaluation CSV with --accuracy.
    #[arg(short, long, env = "CHESSVEC_INPUT")]
    input: PathBuf,
    /// Standard output by default.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Top K moves per component.
    #[arg(long, value_name = "K")]
    top_moves: Option<usize>,
    /// Component scores per row.
    #[arg(long)]
    scores: bool,
    /// Explained variance per PCA component.
    #[arg(long)]
    variance: bool,
    /// Accuracy table from an evaluation CSV.
    #[arg(long)]
    accuracy: bool,
    /// Append a text bar chart to the accuracy table.
    #[arg(long, requires = "accuracy")]
    chart: bool,
}

fn parse_option(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl SelfplayArgs {
    fn engine(&self, command: &str) -> EngineConfig {
        let mut e = EngineConfig::new(command);
        e.args = self.engine_args.clone();
        e.options = self.options.iter().cloned().collect();
        e.timeout_ms = self.timeout_ms;
        e.limit = match (self.movetime, self.depth) {
            (_, Some(d)) => SearchLimit::Depth(d),
            (Some(ms), None) => SearchLimit::Movetime(ms),
            (None, None) => SearchLimit::default(),
        };
        e
    }
}

fn config(command: Command) -> Result<RunConfig, PipelineError> {
    Ok(match command {
        Command::Selfplay(a) => RunConfig::Selfplay(SelfplayStage {
            white: a.engine(&a.engine),
            black: a.engine(a.black_engine.as_deref().unwrap_or(&a.engine)),
            output: a.output,
            games: a.games,
            max_plies: a.max_plies,
            seed: a.seed,
            zobrist_seed: a.zobrist_seed,
        }),
        Command::Ingest(a) => RunConfig::Ingest(IngestStage {
            format: a.format.unwrap_or_else(|| InputFormat::from_path(&a.input)),
            input: a.input,
            output: a.output,
            zobrist_seed: a.zobrist_seed,
            num_buckets: a.buckets,
            lenient: a.lenient,
        }),
        Command::Split(a) => RunConfig::Split(SplitStage {
            input: a.input,
            train_output: a.train,
            test_output: a.test,
            test_fraction: a.test_fraction,
            split_seed: a.split_seed,
        }),
        Command::Counts(a) => RunConfig::Counts(CountsStage { input: a.input, output: a.output, scheme: a.scheme }),
        Command::Pca(a) => RunConfig::Pca(PcaStage { input: a.input, output: a.output, scheme: a.scheme, d: a.d }),
        Command::Nmf(a) => RunConfig::Nmf(NmfStage {
            nmf: a.nmf.options(),
            input: a.input,
            output: a.output,
            scheme: a.scheme,
            preprocessing: a.preprocessing,
        }),
        Command::Predict(a) => RunConfig::Predict(PredictStage {
            input: a.input,
            model: a.model,
            output: a.output,
            legal_only: a.legal_only,
            split_seed: a.split_seed,
        }),
        Command::Sweep(a) => RunConfig::Sweep(SweepStage {
            sweep: SweepConfig {
                bucket_counts: a.buckets,
                split_seeds: a.split_seeds,
                test_fraction: a.test_fraction,
                split_mode: a.split_mode,
                nmf: a.nmf.options(),
                preprocessing: a.preprocessing,
                legal_only: a.legal_only,
            },
            input: a.input,
            output: a.output,
            zobrist_seed: a.zobrist_seed,
        }),
        Command::Report(a) => RunConfig::Report(ReportStage {
            report: match (a.top_moves, a.scores, a.variance) {
                (Some(k), ..) => ReportKind::TopMoves { k },
                (None, true, _) => ReportKind::Scores,
                (None, false, true) => ReportKind::Variance,
                _ => ReportKind::Accuracy { chart: a.chart },
            },
            input: a.input,
            output: a.output,
        }),
        Command::Run { config } => {
            let text = fs::read_to_string(&config)
                .map_err(|source| PipelineError::Io { stage: "run", path: config.clone(), source })?;
            pipeline::parse_run_config(&text).map_err(|message| PipelineError::Stage { stage: "run", message })?
        }
        Command::Rerun { .. } | Command::StubEngine { .. } => unreachable!("handled before config"),
    })
}

fn print_outcome(outcome: &pipeline::StageOutcome) -> io::Result<()> {
    let mut err = io::stderr().lock();
    for line in &outcome.summary {
        writeln!(err, "{line}")?;
    }
    if let Some(path) = &outcome.manifest_path {
        writeln!(err, "manifest: {}", path.display())?;
    }
    if let Some(text) = &outcome.stdout {
        io::stdout().lock().write_all(text.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::StubEngine { seed } => {
            uci::serve_random_engine(io::stdin().lock(), io::stdout().lock(), seed)
                .map_err(|source| PipelineError::Io { stage: "stub-engine", path: "<stdio>".into(), source })
        }
        Command::Rerun { manifest, out_dir } => {
            let report = pipeline::rerun(&manifest, out_dir.as_deref(), cli.jobs)?;
            let _ = print_outcome(&report.outcome);
            for c in &report.checks {
                let verdict = if c.matches() { "identical" } else { "DIFFERS" };
                eprintln!("{verdict}: {} (recorded {})", c.reproduced.path.display(), c.recorded.path.display());
            }
            if report.all_match() {
                Ok(())
            } else if report.live_engine {
                eprintln!("outputs differ; this run uses an external engine, so that is not an error");
                Ok(())
            } else {
                Err(PipelineError::Stage { stage: "rerun", message: "reproduced outputs differ from the manifest".into() })
            }
        }
        command => {
            let cfg = config(command)?;
            let outcome = pipeline::execute(&cfg, cli.jobs)?;
            let _ = print_outcome(&outcome);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
