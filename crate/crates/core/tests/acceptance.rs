//! Acceptance suite. Prints one PASS/FAIL/WARN line per criterion and exits
//! nonzero if any hard criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chessvec::chess::{PieceId, PieceKind, Position};
use chessvec::counts::{build_count_matrix, Scheme, NUM_MOVES};
use chessvec::factor::{fit_nmf_counts, fit_pca_counts, nmf_fit_dense, pca_fit, NmfOptions, Preprocessing};
use chessvec::game::{GameRecord, GameResult};
use chessvec::ingest::{annotate_buckets, filter_white_wins, parse_pgn, FilteredDataset};
use chessvec::pipeline::{
    self, CountsStage, IngestStage, InputFormat, NmfStage, PcaStage, PredictStage, ReportKind, ReportStage, RunConfig,
    SelfplayStage, SplitStage, SweepStage,
};
use chessvec::predict::{bucket_sweep, Predictor, SweepConfig, RANDOM_BASELINE};
use chessvec::selfplay::{run_selfplay, SelfplayOptions};
use chessvec::uci::EngineConfig;
use chessvec::zobrist::{default_tables, NumBuckets};

use common::naive;

enum Verdict {
    Pass(String),
    Fail(String),
    Warn(String),
}

fn pass_if(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// 1. Move generation.

fn movegen() -> Verdict {
    let start = Position::initial();
    let t = Instant::now();
    let counts: Vec<u64> = (1..=3).map(|d| start.perft(d)).collect();
    let elapsed = t.elapsed();
    let oracle = naive::Board::from_fen(&start.to_fen());
    let naive_counts: Vec<u64> = (1..=3).map(|d| oracle.perft(d)).collect();
    let ok = counts == [20, 400, 8902] && naive_counts == counts && elapsed < Duration::from_secs(1);
    pass_if(ok, format!("perft 1..3 = {counts:?}, naive oracle {naive_counts:?}, {}", secs(elapsed)))
}

// 2. Incremental Zobrist hashing.

fn zobrist() -> Verdict {
    let tables = default_tables();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let (mut plies, mut mismatches) = (0u64, 0u64);
    while plies < 10_000 {
        let mut pos = Position::initial();
        let mut h = tables.full_hash(&pos);
        for _ in 0..300 {
            let moves = pos.legal_moves();
            let Some(m) = moves.choose(&mut rng) else { break };
            h = tables.incremental_update(h, &pos, m);
            pos = pos.apply_move(m).expect("legal move");
            plies += 1;
            mismatches += (h != tables.full_hash(&pos)) as u64 + (pos.key() != h) as u64;
        }
    }
    let elapsed = t.elapsed();
    pass_if(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{plies} plies, {mismatches} mismatches, {}", secs(elapsed)),
    )
}

// 3. PCA against independent oracles.

fn covariance_projector(x: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let eig = (x.transpose() * x).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = DMatrix::zeros(x.ncols(), d);
    for (c, &i) in order.iter().take(d).enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    &v * v.transpose()
}

fn pca() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_obj, mut worst_proj, mut unordered) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let n = rng.random_range(2..=50);
        let p = rng.random_range(2..=50);
        let d = rng.random_range(1..=n.min(p));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let m = pca_fit(&x, d).expect("valid dimension");
        let xhat = (&x * &m.loadings) * m.loadings.transpose();
        let direct: f64 = (&x - xhat).iter().map(|v| v * v).sum();
        worst_obj = worst_obj.max((direct - m.discarded_variance()).abs());
        let ours = &m.loadings * m.loadings.transpose();
        worst_proj = worst_proj.max((ours - covariance_projector(&x, d)).amax());
        unordered += m.explained_variance_ratio.windows(2).any(|w| w[1] > w[0]) as usize;
    }
    pass_if(
        worst_obj < 1e-8 && worst_proj < 1e-6 && unordered == 0,
        format!("max |objective - discarded| {worst_obj:.2e}, max projector gap {worst_proj:.2e}, {unordered} unordered"),
    )
}

// 4. NMF properties.

fn nmf() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut rises, mut negatives, mut nondeterministic) = (0, 0, 0);
    for i in 0..100 {
        let n = rng.random_range(2..=30);
        let p = rng.random_range(2..=30);
        let d = rng.random_range(1..=n.min(p));
        let x = DMatrix::from_fn(n, p, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..5.0) });
        let opts = NmfOptions { d, max_iters: 200, rel_tol: 0.0, seed: i };
        let a = nmf_fit_dense(&x, &opts).expect("valid input");
        let b = nmf_fit_dense(&x, &opts).expect("valid input");
        rises += a.objective_trace.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
        negatives += a.w.iter().chain(a.h.iter()).filter(|&&v| v < 0.0).count();
        nondeterministic += (a != b) as usize;
    }
    let exact = NmfOptions { max_iters: 20_000, rel_tol: 0.0, ..NmfOptions::default() };
    let identity = DMatrix::<f64>::identity(6, 6);
    let id_obj = nmf_fit_dense(&identity, &NmfOptions { d: 6, ..exact }).expect("valid").final_objective();
    let square = DMatrix::from_fn(6, 9, |_, _| rng.random_range(0.0..1.0));
    let dp = DMatrix::from_fn(9, 6, |_, _| rng.random_range(0.0..1.0));
    let dp_obj = nmf_fit_dense(&dp, &NmfOptions { d: 6, ..exact }).expect("valid").final_objective();
    let sq_obj = nmf_fit_dense(&square, &NmfOptions { d: 6, ..exact }).expect("valid").final_objective();
    pass_if(
        rises == 0 && negatives == 0 && nondeterministic == 0 && id_obj < 1e-6 && dp_obj < 1e-6 && sq_obj < 1e-6,
        format!(
            "{rises} rising steps, {negatives} negative entries, {nondeterministic} nondeterministic; \
             identity {id_obj:.1e}, d = p {dp_obj:.1e}, d = n {sq_obj:.1e}"
        ),
    )
}

// 5. Prediction against the summed-counts oracle.

/// Repeats give each white move at a shared position a distinct count, so
/// the oracle argmax is unique everywhere.
const ORACLE_PGN: &str = "\
1. e4 e5 2. Bc4 Nc6 3. Qh5 Nf6 4. Qxf7# 1-0
1. e4 e5 2. Qh5 Nc6 3. Bc4 Nf6 4. Qxf7# 1-0
1. e4 e5 2. Qh5 Nc6 3. Bc4 Nf6 4. Qxf7# 1-0
1. e4 e5 2. Nf3 d6 3. Bc4 Bg4 4. Nc3 g6 5. Nxe5 Bxd1 6. Bxf7+ Ke7 7. Nd5# 1-0
1. e4 e5 2. Nf3 d6 3. Bc4 Bg4 4. Nc3 g6 5. Nxe5 Bxd1 6. Bxf7+ Ke7 7. Nd5# 1-0
1. e4 e5 2. Nf3 d6 3. Bc4 Bg4 4. Nc3 g6 5. Nxe5 Bxd1 6. Bxf7+ Ke7 7. Nd5# 1-0
1. e4 f6 2. d4 g5 3. Qh5# 1-0
1. e4 g5 2. d4 f6 3. Qh5# 1-0
1. d4 f5 2. Bg5 h6 3. Bh4 g5 4. Bg3 f4 5. e3 h5 6. Bd3 Rh6 7. Qxh5+ Rxh5 8. Bg6# 1-0
1. f4 e5 2. g4 Qh4# 0-1
";

fn oracle_argmax(y: &[u64]) -> (usize, bool) {
    let best = (0..y.len()).max_by(|&a, &b| y[a].cmp(&y[b]).then(b.cmp(&a))).expect("nonempty");
    let unique = y.iter().filter(|&&v| v == y[best]).count() == 1;
    (best, unique)
}

fn prediction_oracle() -> Verdict {
    let tables = default_tables();
    let games = parse_pgn(ORACLE_PGN.as_bytes(), tables).expect("valid PGN");
    let nb = NumBuckets::new(1024).expect("power of two");
    let ds = annotate_buckets(&filter_white_wins(&games, tables.seed()), tables, 1024).expect("annotate");
    let x = build_count_matrix(&ds, Scheme::PieceBucket).expect("counts");
    let n = x.counts.nonempty_rows().count();
    let opts = NmfOptions { d: n, max_iters: 50_000, rel_tol: 0.0, seed: 5 };
    let model = fit_nmf_counts(&x, Preprocessing::RawCounts, &opts).expect("fit");
    let objective = model.final_objective();
    let predictor = Predictor::new(&model, tables, nb).expect("compatible model");

    let (mut agree, mut total, mut ties) = (0, 0, 0);
    for g in &ds.games {
        let line = g.replay().expect("replayable");
        for r in ds.game_records(g) {
            let pos = &line[r.ply as usize - 1];
            let bucket = r.bucket.expect("annotated").get() as usize;
            let mut y = vec![0u64; NUM_MOVES];
            for id in PieceId::white_pieces() {
                if pos.white_piece_map().contains(&id) {
                    let row = (id.index() - 1) * nb.get() as usize + bucket;
                    let (cols, vals) = x.counts.row(row);
                    for (&c, &v) in cols.iter().zip(vals) {
                        y[c as usize] += v;
                    }
                }
            }
            let (best, unique) = oracle_argmax(&y);
            ties += !unique as usize;
            agree += (predictor.predict_move(pos, false).index() == best) as usize;
            total += 1;
        }
    }
    pass_if(
        objective < 1e-8 && ties == 0 && agree == total,
        format!("d = n = {n}, objective {objective:.1e}, agreement {agree}/{total}, oracle ties {ties}"),
    )
}

// 6 and 7 share one selfplay corpus.

const TREND_GAMES: u64 = 4_000;
const CLUSTER_GAMES: u64 = 16_000;

fn white_wins_by_id(max_games: u64) -> (Vec<GameRecord>, Duration) {
    let engine = EngineConfig::builtin_random();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = SelfplayOptions { max_games, max_plies: 600, seed: 1, jobs };
    let mut wins = Vec::new();
    let t = Instant::now();
    run_selfplay(&engine, &engine, &opts, default_tables(), |g| {
        if g.result == GameResult::WhiteWin {
            wins.push(g.clone());
        }
        Ok(())
    })
    .expect("built-in engines do not fail");
    (wins, t.elapsed())
}

fn dataset(games: &[GameRecord]) -> FilteredDataset {
    filter_white_wins(games, default_tables().seed())
}

fn trend(wins: &[GameRecord], selfplay_time: Duration) -> Verdict {
    let t = Instant::now();
    let subset: Vec<GameRecord> = wins.iter().filter(|g| g.game_id <= TREND_GAMES).cloned().collect();
    let ds = dataset(&subset);
    let cfg = SweepConfig { bucket_counts: vec![1, 16, 256], split_seeds: vec![1, 2, 3], ..SweepConfig::default() };
    let report = bucket_sweep(&ds, &cfg, default_tables()).expect("sweep");
    let elapsed = selfplay_time + t.elapsed();
    let floor = 20.0 * RANDOM_BASELINE;
    let min_acc = report.rows.iter().map(|r| r.accuracy).fold(f64::INFINITY, f64::min);
    let means: BTreeMap<u32, f64> = report.mean_accuracy_by_buckets().into_iter().collect();
    let ok = ds.num_records() >= 20_000
        && min_acc >= floor
        && means[&256] >= means[&1]
        && elapsed < Duration::from_secs(600);
    let shown: Vec<String> = means.iter().map(|(b, a)| format!("{b}:{a:.5}")).collect();
    pass_if(
        ok,
        format!(
            "{} moves, min accuracy {min_acc:.5} (floor {floor:.5}), means {}, {}",
            ds.num_records(),
            shown.join(" "),
            secs(elapsed)
        ),
    )
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn clustering(wins: &[GameRecord]) -> Verdict {
    let ds = dataset(wins);
    let x = build_count_matrix(&ds, Scheme::PerPiece).expect("counts");
    let model = fit_pca_counts(&x, 5).expect("fit");
    let scores: Vec<Vec<f64>> = (0..16).map(|i| model.scores.row(i).iter().take(3).copied().collect()).collect();
    let kind = |i: usize| PieceId::new(i as u8 + 1).and_then(|p| p.initial_kind()).unwrap_or(PieceKind::Pawn);
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for i in 0..16 {
        for j in i + 1..16 {
            let s = cosine(&scores[i], &scores[j]);
            if kind(i) == kind(j) {
                intra.push(s);
            } else {
                inter.push(s);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&intra), mean(&inter));
    let cumulative = model.cumulative_explained_variance()[4];
    let detail = format!(
        "{} moves, intra-type cosine {a:.3} vs inter-type {b:.3}, first five components explain {:.1}% (reference 81.0%)",
        ds.num_records(),
        100.0 * cumulative
    );
    if ds.num_records() >= 100_000 && a > b {
        Verdict::Pass(detail)
    } else {
        Verdict::Warn(format!("{detail}; random-mover data carries little piece structure"))
    }
}

// 8. Manifest reruns.

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let p = |name: &str| dir.path().join(name);
    let stages = vec![
        RunConfig::Selfplay(SelfplayStage {
            output: p("games.mlog"),
            white: EngineConfig::builtin_random(),
            black: EngineConfig::builtin_random(),
            games: 120,
            max_plies: 400,
            seed: 8,
            zobrist_seed: 8,
        }),
        RunConfig::Ingest(IngestStage {
            input: p("games.mlog"),
            format: InputFormat::Mlog,
            output: p("data.mlog"),
            zobrist_seed: 9,
            num_buckets: Some(16),
            lenient: false,
        }),
        RunConfig::Split(SplitStage {
            input: p("data.mlog"),
            train_output: p("train.mlog"),
            test_output: p("test.mlog"),
            test_fraction: 0.25,
            split_seed: 2,
        }),
        RunConfig::Counts(CountsStage { input: p("train.mlog"), output: p("counts.tsv"), scheme: Scheme::PieceBucket }),
        RunConfig::Nmf(NmfStage {
            input: p("counts.tsv"),
            output: p("nmf.json"),
            scheme: None,
            preprocessing: Preprocessing::RowNormalized,
            nmf: NmfOptions { d: 4, max_iters: 100, ..NmfOptions::default() },
        }),
        RunConfig::Pca(PcaStage { input: p("counts.tsv"), output: p("pca.json"), scheme: Some(Scheme::PerPiece), d: 5 }),
        RunConfig::Predict(PredictStage {
            input: p("test.mlog"),
            model: p("nmf.json"),
            output: p("eval.csv"),
            legal_only: false,
            split_seed: 2,
        }),
        RunConfig::Sweep(SweepStage {
            input: p("data.mlog"),
            output: p("sweep.csv"),
            zobrist_seed: None,
            sweep: SweepConfig {
                bucket_counts: vec![1, 4],
                split_seeds: vec![1, 2],
                nmf: NmfOptions { d: 3, max_iters: 50, ..NmfOptions::default() },
                ..SweepConfig::default()
            },
        }),
        RunConfig::Report(ReportStage {
            input: p("pca.json"),
            output: Some(p("top.csv")),
            report: ReportKind::TopMoves { k: 5 },
        }),
        RunConfig::Report(ReportStage { input: p("nmf.json"), output: Some(p("scores.csv")), report: ReportKind::Scores }),
        RunConfig::Report(ReportStage {
            input: p("sweep.csv"),
            output: Some(p("chart.txt")),
            report: ReportKind::Accuracy { chart: true },
        }),
    ];
    let mut manifests = Vec::new();
    for cfg in &stages {
        match pipeline::execute(cfg, Some(2)) {
            Ok(o) => manifests.push(o.manifest_path.expect("file output")),
            Err(e) => return Verdict::Fail(format!("stage failed: {e}")),
        }
    }
    let (mut identical, mut checked) = (0, 0);
    let mut differing = Vec::new();
    for (i, m) in manifests.iter().enumerate() {
        let out = dir.path().join(format!("rerun-{i}"));
        match pipeline::rerun(m, Some(Path::new(&out)), Some(1)) {
            Ok(r) => {
                for c in &r.checks {
                    checked += 1;
                    if c.matches() {
                        identical += 1;
                    } else {
                        differing.push(c.recorded.path.display().to_string());
                    }
                }
            }
            Err(e) => return Verdict::Fail(format!("rerun of {} failed: {e}", m.display())),
        }
    }
    pass_if(
        identical == checked && checked > 0,
        format!("{identical}/{checked} outputs byte-identical over {} stages{}", stages.len(), if differing.is_empty() { String::new() } else { format!("; differ: {}", differing.join(", ")) }),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filters.is_empty() || filters.iter().any(|f| id == f);
    let mut failures = 0;
    let mut report = |id: &str, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Verdict::Warn(d) => ("WARN", d),
        };
        println!("{tag} {id} {name}: {detail}");
    };
    if wanted("c1") {
        report("c1", "movegen perft", guarded(movegen));
    }
    if wanted("c2") {
        report("c2", "zobrist incremental", guarded(zobrist));
    }
    if wanted("c3") {
        report("c3", "pca oracle", guarded(pca));
    }
    if wanted("c4") {
        report("c4", "nmf properties", guarded(nmf));
    }
    if wanted("c5") {
        report("c5", "prediction oracle", guarded(prediction_oracle));
    }
    if wanted("c6") || wanted("c7") {
        let (wins, took) = white_wins_by_id(CLUSTER_GAMES);
        // Games are independent, so the first TREND_GAMES cost their share.
        let trend_time = took.mul_f64(TREND_GAMES as f64 / CLUSTER_GAMES as f64);
        if wanted("c6") {
            report("c6", "bucket trend", guarded(|| trend(&wins, trend_time)));
        }
        if wanted("c7") {
            report("c7", "piece clustering (soft)", guarded(|| clustering(&wins)));
        }
    }
    if wanted("c8") {
        report("c8", "manifest determinism", guarded(determinism));
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
