//! Stage runners over files, with a manifest per run.
//!
//! Every stage reads and writes the formats of its owning module. After a
//! stage succeeds, `<first output>.manifest.json` records the run
//! configuration, the SHA-256 of each input and output, and the tool
//! version. [`rerun`] replays a manifest and compares output digests.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::counts::{build_count_matrix, read_counts, write_counts, CountMatrix, Scheme};
use crate::factor::{
    component_scores, fit_nmf_counts, fit_pca_counts, read_model, top_moves_per_component, write_model,
    write_scores_csv, write_top_moves_csv, Model, NmfOptions, Preprocessing,
};
use crate::ingest::{
    annotate_buckets, filter_white_wins, parse_pgn, parse_pgn_lenient, read_mlog, rehash, FilteredDataset, MlogHeader, MlogWriter,
};
use crate::predict::{
    bucket_sweep, evaluate_accuracy, split_train_test, EvalReport, EvalRow, SplitMode, SweepConfig, RANDOM_BASELINE,
};
use crate::selfplay::{run_selfplay, SelfplayOptions};
use crate::uci::EngineConfig;
use crate::zobrist::ZobristTables;

pub const MANIFEST_FORMAT: &str = "chessvec-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] {}: {source}", path.display())]
    Io { stage: &'static str, path: PathBuf, source: io::Error },
    #[error("[{stage}] {message}")]
    Stage { stage: &'static str, message: String },
}

fn fail<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Mlog,
    Pgn,
}

impl InputFormat {
    /// `.pgn` means PGN; anything else is read as a move log.
    pub fn from_path(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgn") => InputFormat::Pgn,
            _ => InputFormat::Mlog,
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlog" => Ok(InputFormat::Mlog),
            "pgn" => Ok(InputFormat::Pgn),
            _ => Err(format!("unknown input format `{s}` (mlog, pgn)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfplayStage {
    pub output: PathBuf,
    pub white: EngineConfig,
    pub black: EngineConfig,
    pub games: u64,
    pub max_plies: u32,
    pub seed: u64,
    pub zobrist_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestStage {
    pub input: PathBuf,
    pub format: InputFormat,
    pub output: PathBuf,
    pub zobrist_seed: u64,
    pub num_buckets: Option<u32>,
    /// Skip unparseable PGN games instead of failing.
    #[serde(default)]
    pub lenient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStage {
    pub input: PathBuf,
    pub train_output: PathBuf,
    pub test_output: PathBuf,
    pub test_fraction: f64,
    pub split_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsStage {
    pub input: PathBuf,
    pub output: PathBuf,
    pub scheme: Scheme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaStage {
    /// A counts file or a dataset move log.
    pub input: PathBuf,
    pub output: PathBuf,
    /// Required for a move log; for a counts file, only collapsing
    /// piece-bucket rows to per-piece rows is supported.
    pub scheme: Option<Scheme>,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfStage {
    pub input: PathBuf,
    pub output: PathBuf,
    pub scheme: Option<Scheme>,
    pub preprocessing: Preprocessing,
    pub nmf: NmfOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictStage {
    /// Test games; every white-win white move is scored.
    pub input: PathBuf,
    pub model: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub legal_only: bool,
    /// Copied into the report row as a label.
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStage {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Defaults to the dataset's own seed.
    pub zobrist_seed: Option<u64>,
    pub sweep: SweepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportKind {
    /// Needs a model file.
    TopMoves { k: usize },
    /// Needs a model file.
    Scores,
    /// Needs a PCA model file.
    Variance,
    /// Needs an evaluation CSV.
    Accuracy { chart: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportStage {
    pub input: PathBuf,
    /// Standard output when absent; no manifest is written then.
    pub output: Option<PathBuf>,
    pub report: ReportKind,
}

/// A complete, serializable description of one stage run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum RunConfig {
    Selfplay(SelfplayStage),
    Ingest(IngestStage),
    Split(SplitStage),
    Counts(CountsStage),
    Pca(PcaStage),
    Nmf(NmfStage),
    Predict(PredictStage),
    Sweep(SweepStage),
    Report(ReportStage),
}

impl RunConfig {
    pub fn stage_name(&self) -> &'static str {
        match self {
            RunConfig::Selfplay(_) => "selfplay",
            RunConfig::Ingest(_) => "ingest",
            RunConfig::Split(_) => "split",
            RunConfig::Counts(_) => "counts",
            RunConfig::Pca(_) => "pca",
            RunConfig::Nmf(_) => "nmf",
            RunConfig::Predict(_) => "predict",
            RunConfig::Sweep(_) => "sweep",
            RunConfig::Report(_) => "report",
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            RunConfig::Selfplay(_) => vec![],
            RunConfig::Ingest(c) => vec![c.input.clone()],
            RunConfig::Split(c) => vec![c.input.clone()],
            RunConfig::Counts(c) => vec![c.input.clone()],
            RunConfig::Pca(c) => vec![c.input.clone()],
            RunConfig::Nmf(c) => vec![c.input.clone()],
            RunConfig::Predict(c) => vec![c.input.clone(), c.model.clone()],
            RunConfig::Sweep(c) => vec![c.input.clone()],
            RunConfig::Report(c) => vec![c.input.clone()],
        }
    }

    pub fn outputs(&self) -> Vec<PathBuf> {
        match self {
            RunConfig::Selfplay(c) => vec![c.output.clone()],
            RunConfig::Ingest(c) => vec![c.output.clone()],
            RunConfig::Split(c) => vec![c.train_output.clone(), c.test_output.clone()],
            RunConfig::Counts(c) => vec![c.output.clone()],
            RunConfig::Pca(c) => vec![c.output.clone()],
            RunConfig::Nmf(c) => vec![c.output.clone()],
            RunConfig::Predict(c) => vec![c.output.clone()],
            RunConfig::Sweep(c) => vec![c.output.clone()],
            RunConfig::Report(c) => c.output.iter().cloned().collect(),
        }
    }

    /// Whether outputs depend on an external engine process.
    pub fn uses_live_engine(&self) -> bool {
        matches!(self, RunConfig::Selfplay(c) if !c.white.is_builtin() || !c.black.is_builtin())
    }

    /// The same run with every output placed in `dir`, keeping file names.
    pub fn with_output_dir(&self, dir: &Path) -> RunConfig {
        let move_to = |p: &PathBuf| dir.join(p.file_name().unwrap_or(p.as_os_str()));
        let mut c = self.clone();
        match &mut c {
            RunConfig::Selfplay(s) => s.output = move_to(&s.output),
            RunConfig::Ingest(s) => s.output = move_to(&s.output),
            RunConfig::Split(s) => {
                s.train_output = move_to(&s.train_output);
                s.test_output = move_to(&s.test_output);
            }
            RunConfig::Counts(s) => s.output = move_to(&s.output),
            RunConfig::Pca(s) => s.output = move_to(&s.output),
            RunConfig::Nmf(s) => s.output = move_to(&s.output),
            RunConfig::Predict(s) => s.output = move_to(&s.output),
            RunConfig::Sweep(s) => s.output = move_to(&s.output),
            RunConfig::Report(s) => s.output = s.output.as_ref().map(move_to),
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err("rerun", path))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Stage {
            stage: "rerun",
            message: format!("{}: {e}", path.display()),
        })?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(PipelineError::Stage {
                stage: "rerun",
                message: format!("{}: unsupported manifest {} v{}", path.display(), m.format, m.version),
            });
        }
        Ok(m)
    }
}

/// A saved stage configuration: a bare [`RunConfig`] or a whole manifest.
pub fn parse_run_config(text: &str) -> Result<RunConfig, String> {
    match serde_json::from_str::<RunConfig>(text) {
        Ok(c) => Ok(c),
        Err(e) => serde_json::from_str::<Manifest>(text).map(|m| m.config).map_err(|_| e.to_string()),
    }
}

/// Where the manifest of a run with this primary output goes.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn digests(stage: &'static str, paths: &[PathBuf]) -> Result<Vec<FileDigest>, PipelineError> {
    paths
        .iter()
        .map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p).map_err(io_err(stage, p))? }))
        .collect()
}

fn io_err<'a>(stage: &'static str, path: &'a Path) -> impl Fn(io::Error) -> PipelineError + 'a {
    move |source| PipelineError::Io { stage, path: path.to_path_buf(), source }
}

/// What a finished stage hands back to its caller.
#[derive(Clone, Debug, Default)]
pub struct StageOutcome {
    /// Human-readable summary lines.
    pub summary: Vec<String>,
    /// Report text when no output file was given.
    pub stdout: Option<String>,
    pub manifest: Option<Manifest>,
    pub manifest_path: Option<PathBuf>,
}

/// Runs one stage with at most `jobs` worker threads (all cores when
/// `None`), then writes its manifest.
pub fn execute(cfg: &RunConfig, jobs: Option<usize>) -> Result<StageOutcome, PipelineError> {
    let stage = cfg.stage_name();
    let inputs = cfg.inputs();
    for p in &inputs {
        if !p.is_file() {
            return Err(PipelineError::Io {
                stage,
                path: p.clone(),
                source: io::Error::new(io::ErrorKind::NotFound, "input file not found"),
            });
        }
    }
    let input_digests = digests(stage, &inputs)?;
    let workers = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(fail(stage))?;
    let mut outcome = pool.install(|| run_stage(cfg, workers))?;

    let outputs = cfg.outputs();
    if let Some(primary) = outputs.first() {
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            tool_version: TOOL_VERSION.into(),
            config: cfg.clone(),
            inputs: input_digests,
            outputs: digests(stage, &outputs)?,
        };
        let path = manifest_path(primary);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(fail(stage))?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(stage, &path))?;
        outcome.manifest = Some(manifest);
        outcome.manifest_path = Some(path);
    }
    Ok(outcome)
}

/// One output of a rerun set against the manifest's recorded digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputCheck {
    pub recorded: FileDigest,
    pub reproduced: FileDigest,
}

impl OutputCheck {
    pub fn matches(&self) -> bool {
        self.recorded.sha256 == self.reproduced.sha256
    }
}

#[derive(Clone, Debug)]
pub struct RerunReport {
    pub checks: Vec<OutputCheck>,
    /// Digest mismatches are expected for engine-driven selfplay.
    pub live_engine: bool,
    pub outcome: StageOutcome,
}

impl RerunReport {
    pub fn all_match(&self) -> bool {
        self.checks.iter().all(OutputCheck::matches)
    }
}

/// Replays a manifest. Inputs must still have their recorded digests.
/// Outputs go to `out_dir` when given, otherwise over the original paths.
pub fn rerun(manifest: &Path, out_dir: Option<&Path>, jobs: Option<usize>) -> Result<RerunReport, PipelineError> {
    let m = Manifest::read(manifest)?;
    for recorded in &m.inputs {
        let now = sha256_file(&recorded.path).map_err(io_err("rerun", &recorded.path))?;
        if now != recorded.sha256 {
            return Err(PipelineError::Stage {
                stage: "rerun",
                message: format!("input {} changed since the recorded run", recorded.path.display()),
            });
        }
    }
    let cfg = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err("rerun", dir))?;
            m.config.with_output_dir(dir)
        }
        None => m.config.clone(),
    };
    let outcome = execute(&cfg, jobs)?;
    let reproduced = outcome.manifest.as_ref().map(|n| n.outputs.clone()).unwrap_or_default();
    let checks = m
        .outputs
        .iter()
        .cloned()
        .zip(reproduced)
        .map(|(recorded, reproduced)| OutputCheck { recorded, reproduced })
        .collect();
    Ok(RerunReport { checks, live_engine: m.config.uses_live_engine(), outcome })
}

fn create(stage: &'static str, path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(stage, dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(stage, path))?))
}

fn open(stage: &'static str, path: &Path) -> Result<BufReader<File>, PipelineError> {
    Ok(BufReader::new(File::open(path).map_err(io_err(stage, path))?))
}

/// Reads a move log as a white-win dataset. Bucket annotations in an
/// annotated log are kept.
pub fn load_dataset(stage: &'static str, path: &Path) -> Result<FilteredDataset, PipelineError> {
    let (header, games) = read_mlog(open(stage, path)?).map_err(fail(stage))?;
    let mut ds = filter_white_wins(&games, header.zobrist_seed);
    if let Some(nb) = header.num_buckets {
        if ds.records().all(|r| r.bucket.is_some()) {
            ds.meta.num_buckets = Some(nb);
        }
    }
    Ok(ds)
}

/// Writes a dataset as a filtered move log.
pub fn save_dataset(stage: &'static str, path: &Path, ds: &FilteredDataset) -> Result<(), PipelineError> {
    let header = MlogHeader { num_buckets: ds.meta.num_buckets, filtered: true, ..MlogHeader::new(ds.meta.zobrist_seed) };
    let mut w = MlogWriter::new(create(stage, path)?, &header).map_err(fail(stage))?;
    for g in &ds.games {
        w.write_game(g).map_err(fail(stage))?;
    }
    w.finish().map_err(fail(stage))?;
    Ok(())
}

fn is_counts_file(stage: &'static str, path: &Path) -> Result<bool, PipelineError> {
    let mut first = String::new();
    open(stage, path)?.read_line(&mut first).map_err(io_err(stage, path))?;
    Ok(first.contains(crate::counts::COUNTS_FORMAT))
}

/// A count matrix from a counts file or a dataset move log.
fn load_matrix(stage: &'static str, path: &Path, scheme: Option<Scheme>) -> Result<CountMatrix, PipelineError> {
    if is_counts_file(stage, path)? {
        let x = read_counts(open(stage, path)?).map_err(fail(stage))?;
        return match scheme {
            None => Ok(x),
            Some(s) if s == x.scheme => Ok(x),
            Some(Scheme::PerPiece) if x.scheme == Scheme::PieceBucket => Ok(x.collapse_buckets()),
            Some(s) => Err(PipelineError::Stage {
                stage,
                message: format!("counts file has scheme {}, cannot derive {s}", x.scheme),
            }),
        };
    }
    let scheme = scheme.ok_or_else(|| PipelineError::Stage {
        stage,
        message: "a scheme is required when the input is a move log".into(),
    })?;
    build_count_matrix(&load_dataset(stage, path)?, scheme).map_err(fail(stage))
}

fn load_model(stage: &'static str, path: &Path) -> Result<Model, PipelineError> {
    read_model(open(stage, path)?).map_err(fail(stage))
}

fn save_model(stage: &'static str, path: &Path, model: &Model) -> Result<(), PipelineError> {
    write_model(create(stage, path)?, model).map_err(fail(stage))
}

fn run_stage(cfg: &RunConfig, workers: usize) -> Result<StageOutcome, PipelineError> {
    match cfg {
        RunConfig::Selfplay(c) => selfplay_stage(c, workers),
        RunConfig::Ingest(c) => ingest_stage(c),
        RunConfig::Split(c) => split_stage(c),
        RunConfig::Counts(c) => counts_stage(c),
        RunConfig::Pca(c) => pca_stage(c),
        RunConfig::Nmf(c) => nmf_stage(c),
        RunConfig::Predict(c) => predict_stage(c),
        RunConfig::Sweep(c) => sweep_stage(c),
        RunConfig::Report(c) => report_stage(c),
    }
}

fn outcome(summary: Vec<String>) -> Result<StageOutcome, PipelineError> {
    Ok(StageOutcome { summary, ..StageOutcome::default() })
}

fn selfplay_stage(c: &SelfplayStage, workers: usize) -> Result<StageOutcome, PipelineError> {
    const S: &str = "selfplay";
    let tables = ZobristTables::new(c.zobrist_seed);
    let opts = SelfplayOptions { max_games: c.games, max_plies: c.max_plies, seed: c.seed, jobs: workers };
    let mut w = MlogWriter::new(create(S, &c.output)?, &MlogHeader::new(c.zobrist_seed)).map_err(fail(S))?;
    let mut write_err = None;
    let summary = run_selfplay(&c.white, &c.black, &opts, &tables, |g| {
        w.write_game(g).map_err(|e| {
            let msg = e.to_string();
            write_err = Some(e);
            io::Error::other(msg)
        })
    })
    .map_err(fail(S))?;
    if let Some(e) = write_err {
        return Err(fail(S)(&e));
    }
    w.finish().map_err(fail(S))?;
    outcome(vec![format!(
        "{} games ({} aborted): {} white wins, {} black wins, {} draws, {:.1} plies per game",
        summary.games,
        summary.aborted,
        summary.white_wins,
        summary.black_wins,
        summary.draws,
        summary.mean_plies()
    )])
}

fn ingest_stage(c: &IngestStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "ingest";
    let tables = ZobristTables::new(c.zobrist_seed);
    let mut notes = Vec::new();
    let mut ds = match c.format {
        InputFormat::Pgn => {
            let bytes = fs::read(&c.input).map_err(io_err(S, &c.input))?;
            let games = if c.lenient {
                let (games, rejected) = parse_pgn_lenient(&bytes, &tables).map_err(fail(S))?;
                for e in &rejected {
                    log::warn!("skipped: {e}");
                }
                notes.push(format!("{} games rejected", rejected.len()));
                games
            } else {
                parse_pgn(&bytes, &tables).map_err(fail(S))?
            };
            filter_white_wins(&games, c.zobrist_seed)
        }
        InputFormat::Mlog => {
            let ds = load_dataset(S, &c.input)?;
            let mut ds = rehash(&ds, &tables).map_err(fail(S))?;
            ds.meta.num_buckets = None;
            ds
        }
    };
    if let Some(b) = c.num_buckets {
        ds = annotate_buckets(&ds, &tables, b as u64).map_err(fail(S))?;
    }
    save_dataset(S, &c.output, &ds)?;
    let mut summary = vec![format!(
        "kept {} white-win games ({} dropped), {} white moves",
        ds.summary.games_kept, ds.summary.games_dropped, ds.summary.records_kept
    )];
    summary.extend(notes);
    outcome(summary)
}

fn split_stage(c: &SplitStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "split";
    let ds = load_dataset(S, &c.input)?;
    let (train, test) = split_train_test(&ds, c.test_fraction, c.split_seed, SplitMode::ByGame).map_err(fail(S))?;
    save_dataset(S, &c.train_output, &train)?;
    save_dataset(S, &c.test_output, &test)?;
    outcome(vec![format!("train {} moves, test {} moves", train.num_records(), test.num_records())])
}

fn counts_stage(c: &CountsStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "counts";
    let ds = load_dataset(S, &c.input)?;
    let x = build_count_matrix(&ds, c.scheme).map_err(fail(S))?;
    write_counts(create(S, &c.output)?, &x).map_err(fail(S))?;
    outcome(vec![format!(
        "{} rows x {} columns, {} nonzero entries, {} moves",
        x.n(),
        x.p(),
        x.counts.nnz(),
        x.total_count
    )])
}

fn pca_stage(c: &PcaStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "pca";
    let x = load_matrix(S, &c.input, c.scheme)?;
    let model = fit_pca_counts(&x, c.d).map_err(fail(S))?;
    let mut summary = vec!["component  variance  cumulative".to_string()];
    for (k, (r, cum)) in model.explained_variance_ratio.iter().zip(model.cumulative_explained_variance()).enumerate() {
        summary.push(format!("{:>9}  {:>8.4}  {:>10.4}", k + 1, r, cum));
    }
    save_model(S, &c.output, &Model::Pca(model))?;
    outcome(summary)
}

fn nmf_stage(c: &NmfStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "nmf";
    let x = load_matrix(S, &c.input, c.scheme)?;
    let model = fit_nmf_counts(&x, c.preprocessing, &c.nmf).map_err(fail(S))?;
    let summary = vec![format!(
        "{} iterations, objective {:.6e} over {} nonempty rows",
        model.iterations_run,
        model.final_objective(),
        model.rows.len()
    )];
    save_model(S, &c.output, &Model::Nmf(model))?;
    outcome(summary)
}

fn predict_stage(c: &PredictStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "predict";
    let Model::Nmf(model) = load_model(S, &c.model)? else {
        return Err(PipelineError::Stage { stage: S, message: "prediction needs an NMF model".into() });
    };
    let info = model
        .info
        .ok_or_else(|| PipelineError::Stage { stage: S, message: "model has no count-matrix provenance".into() })?;
    let test = load_dataset(S, &c.input)?;
    let tables = ZobristTables::new(info.zobrist_seed);
    let acc = evaluate_accuracy(&test, &model, &tables, info.num_buckets, c.legal_only).map_err(fail(S))?;
    let row = EvalRow {
        num_buckets: info.num_buckets.get(),
        d: model.d,
        scheme: info.scheme,
        split_seed: c.split_seed,
        train_records: 0,
        test_records: acc.total,
        correct: acc.correct,
        accuracy: acc.rate(),
        empty_bucket_rate: acc.empty_bucket_rate(),
        random_baseline: RANDOM_BASELINE,
    };
    EvalReport { rows: vec![row] }.write_csv(create(S, &c.output)?).map_err(io_err(S, &c.output))?;
    outcome(vec![format!(
        "accuracy {:.5} ({} of {}), empty buckets {:.4}",
        acc.rate(),
        acc.correct,
        acc.total,
        acc.empty_bucket_rate()
    )])
}

fn sweep_stage(c: &SweepStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "sweep";
    let ds = load_dataset(S, &c.input)?;
    let tables = ZobristTables::new(c.zobrist_seed.unwrap_or(ds.meta.zobrist_seed));
    let report = bucket_sweep(&ds, &c.sweep, &tables).map_err(fail(S))?;
    report.write_csv(create(S, &c.output)?).map_err(io_err(S, &c.output))?;
    let summary = report
        .mean_accuracy_by_buckets()
        .into_iter()
        .map(|(b, acc)| format!("{b:>6} buckets: mean accuracy {acc:.5}"))
        .collect();
    outcome(summary)
}

fn report_stage(c: &ReportStage) -> Result<StageOutcome, PipelineError> {
    const S: &str = "report";
    let mut buf = Vec::new();
    match &c.report {
        ReportKind::TopMoves { k } => {
            let model = load_model(S, &c.input)?;
            write_top_moves_csv(&mut buf, &top_moves_per_component(&model, *k)).map_err(fail(S))?;
        }
        ReportKind::Scores => {
            let model = load_model(S, &c.input)?;
            write_scores_csv(&mut buf, &component_scores(&model)).map_err(fail(S))?;
        }
        ReportKind::Variance => {
            let Model::Pca(model) = load_model(S, &c.input)? else {
                return Err(PipelineError::Stage { stage: S, message: "variance needs a PCA model".into() });
            };
            writeln!(buf, "component,explained_variance_ratio,cumulative").map_err(fail(S))?;
            for (k, (r, cum)) in model.explained_variance_ratio.iter().zip(model.cumulative_explained_variance()).enumerate() {
                writeln!(buf, "{},{r},{cum}", k + 1).map_err(fail(S))?;
            }
        }
        ReportKind::Accuracy { chart } => {
            let text = fs::read_to_string(&c.input).map_err(io_err(S, &c.input))?;
            let report = EvalReport::read_csv(&text).map_err(|e| fail(S)(&e))?;
            report.write_csv(&mut buf).map_err(fail(S))?;
            if *chart {
                buf.extend(accuracy_chart(&report).into_bytes());
            }
        }
    }
    match &c.output {
        Some(path) => {
            let mut w = create(S, path)?;
            w.write_all(&buf).and_then(|_| w.flush()).map_err(io_err(S, path))?;
            outcome(vec![format!("wrote {}", path.display())])
        }
        None => Ok(StageOutcome { stdout: Some(String::from_utf8_lossy(&buf).into_owned()), ..StageOutcome::default() }),
    }
}

/// Mean accuracy per bucket count as horizontal bars, with the random
/// baseline for scale.
pub fn accuracy_chart(report: &EvalReport) -> String {
    const WIDTH: f64 = 50.0;
    let means = report.mean_accuracy_by_buckets();
    let top = means.iter().map(|&(_, a)| a).fold(RANDOM_BASELINE, f64::max);
    let mut out = String::from("\nbuckets  mean accuracy\n");
    let mut bar = |label: &str, acc: f64| {
        let n = ((acc / top) * WIDTH).round() as usize;
        let _ = writeln!(out, "{label:>7}  {:<50} {acc:.5}", "#".repeat(n));
    };
    for (b, acc) in &means {
        bar(&b.to_string(), *acc);
    }
    bar("random", RANDOM_BASELINE);
    out
}
