//! Move prediction from NMF factors and its held-out evaluation.
//!
//! The prediction for a position s is y(s) = Hᵀ Σ_l w(f_l(s), h(s)): the
//! W rows of every white piece on the board, taken in the bucket of the
//! position's hash, summed and mapped back to move space. Squares without a
//! white piece, and (piece, bucket) rows never seen in training, add nothing.
//! The predicted move is the argmax of y, ties going to the smallest index.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{MoveIndex, Position};
use crate::counts::{build_count_matrix, CountsError, Scheme, NUM_MOVES};
use crate::factor::{fit_nmf_counts, FactorError, NmfModel, NmfOptions, Preprocessing};
use crate::ingest::{annotate_buckets, FilteredDataset, IngestError};
use crate::zobrist::{bucket_of, NumBuckets, ZobristTables};

pub const RANDOM_BASELINE: f64 = 1.0 / NUM_MOVES as f64;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("test fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("model does not fit this prediction: {0}")]
    ModelSchemeMismatch(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Counts(#[from] CountsError),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Whole games go to one side.
    #[default]
    ByGame,
    /// Individual moves are assigned, so a game can straddle the split.
    ByMove,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "by-game" => Ok(SplitMode::ByGame),
            "by-move" => Ok(SplitMode::ByMove),
            _ => Err(format!("unknown split mode `{s}` (by-game, by-move)")),
        }
    }
}

/// Splits into (train, test). Units (games or moves) are shuffled with
/// `seed` and moved to the test side until it holds at least
/// `test_fraction` of the records.
pub fn split_train_test(
    ds: &FilteredDataset,
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(FilteredDataset, FilteredDataset), PredictError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PredictError::InvalidFraction(test_fraction));
    }
    if ds.is_empty() {
        return Err(PredictError::EmptyDataset);
    }
    let target = test_fraction * ds.num_records() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        SplitMode::ByGame => {
            let mut order: Vec<usize> = (0..ds.games.len()).collect();
            order.shuffle(&mut rng);
            let mut in_test = vec![false; ds.games.len()];
            let mut taken = 0usize;
            for i in order {
                if taken as f64 >= target {
                    break;
                }
                let n = ds.game_records(&ds.games[i]).count();
                if n > 0 {
                    in_test[i] = true;
                    taken += n;
                }
            }
            let side = |test: bool| {
                let games = ds.games.iter().zip(&in_test).filter(|(_, &t)| t == test).map(|(g, _)| g.clone()).collect();
                FilteredDataset::with_selection(ds.meta, games, ds.selection.clone(), 0)
            };
            Ok((side(false), side(true)))
        }
        SplitMode::ByMove => {
            let mut keys: Vec<(u64, u32)> = ds.records().map(|r| (r.game, r.ply)).collect();
            keys.shuffle(&mut rng);
            let cut = (target.ceil() as usize).min(keys.len());
            let test: BTreeSet<_> = keys[..cut].iter().copied().collect();
            let train: BTreeSet<_> = keys[cut..].iter().copied().collect();
            let side = |sel: BTreeSet<(u64, u32)>| {
                let games = ds.games.iter().filter(|g| sel.range((g.game_id, 0)..=(g.game_id, u32::MAX)).next().is_some()).cloned().collect();
                FilteredDataset::with_selection(ds.meta, games, Some(sel), 0)
            };
            Ok((side(train), side(test)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionVector(pub Vec<f64>);

impl PredictionVector {
    /// Index of the largest entry; the smallest index wins ties.
    pub fn argmax(&self) -> MoveIndex {
        argmax_where(&self.0, |_| true)
    }
}

fn argmax_where(y: &[f64], allowed: impl Fn(usize) -> bool) -> MoveIndex {
    let mut best = None;
    for (j, &v) in y.iter().enumerate() {
        if allowed(j) && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    MoveIndex::from_index(best.map_or(0, |(j, _)| j)).expect("index below 4096")
}

/// An NMF model checked for use with given tables and bucket count.
pub struct Predictor<'a> {
    model: &'a NmfModel,
    tables: &'a ZobristTables,
    num_buckets: NumBuckets,
    /// Buckets with at least one trained row.
    trained: Vec<bool>,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a NmfModel, tables: &'a ZobristTables, num_buckets: NumBuckets) -> Result<Self, PredictError> {
        let mismatch = |m: String| Err(PredictError::ModelSchemeMismatch(m));
        let Some(info) = model.info else {
            return mismatch("model carries no row scheme".into());
        };
        match info.scheme {
            Scheme::PieceBucket => {}
            Scheme::PerPiece if num_buckets == NumBuckets::ONE => {}
            s => return mismatch(format!("rows are {s}, prediction needs piece-bucket rows")),
        }
        if info.num_buckets != num_buckets {
            return mismatch(format!("model has {} buckets, asked for {}", info.num_buckets, num_buckets));
        }
        if num_buckets != NumBuckets::ONE && info.zobrist_seed != tables.seed() {
            return mismatch(format!("model hashed with seed {}, tables use {}", info.zobrist_seed, tables.seed()));
        }
        if model.n_cols != NUM_MOVES {
            return mismatch(format!("model has {} columns", model.n_cols));
        }
        let b = num_buckets.get() as usize;
        let mut trained = vec![false; b];
        for &r in &model.rows {
            trained[r as usize % b] = true;
        }
        Ok(Predictor { model, tables, num_buckets, trained })
    }

    fn bucket(&self, pos: &Position) -> usize {
        bucket_of(self.tables.full_hash(pos), self.num_buckets).get() as usize
    }

    /// Σ_l w(f_l(s), h(s)).
    fn summed_weights(&self, pos: &Position) -> Vec<f64> {
        let m = self.model;
        let (b, bucket) = (self.num_buckets.get() as usize, self.bucket(pos));
        let mut s = vec![0.0; m.d];
        for id in pos.white_piece_map().into_iter().filter(|id| !id.is_none()) {
            if let Some(k) = m.stored_row((id.index() - 1) * b + bucket) {
                for (acc, w) in s.iter_mut().zip(m.w.row(k).iter()) {
                    *acc += w;
                }
            }
        }
        s
    }

    pub fn predict_vector(&self, pos: &Position) -> PredictionVector {
        let s = self.summed_weights(pos);
        let h = &self.model.h;
        let y = (0..h.ncols()).map(|j| h.column(j).iter().zip(&s).map(|(a, b)| a * b).sum()).collect();
        PredictionVector(y)
    }

    /// Argmax of y(s), optionally over the legal moves only.
    pub fn predict_move(&self, pos: &Position, legal_only: bool) -> MoveIndex {
        let y = self.predict_vector(pos);
        if legal_only {
            let mut legal = [false; NUM_MOVES];
            for m in pos.legal_moves() {
                legal[m.index().index()] = true;
            }
            argmax_where(&y.0, |j| legal[j])
        } else {
            y.argmax()
        }
    }

    /// Whether the position's bucket received any training mass.
    pub fn bucket_is_trained(&self, pos: &Position) -> bool {
        self.trained[self.bucket(pos)]
    }
}

pub fn predict_vector(
    pos: &Position,
    model: &NmfModel,
    tables: &ZobristTables,
    num_buckets: NumBuckets,
) -> Result<PredictionVector, PredictError> {
    Ok(Predictor::new(model, tables, num_buckets)?.predict_vector(pos))
}

pub fn predict_move(
    pos: &Position,
    model: &NmfModel,
    tables: &ZobristTables,
    num_buckets: NumBuckets,
) -> Result<MoveIndex, PredictError> {
    Ok(Predictor::new(model, tables, num_buckets)?.predict_move(pos, false))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: u64,
    pub total: u64,
    /// Test positions whose bucket has no training mass.
    pub empty_bucket: u64,
}

impl Accuracy {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn empty_bucket_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.empty_bucket as f64 / self.total as f64
        }
    }
}

/// Replays the test games and scores the prediction at every test record
/// against the move actually played.
pub fn evaluate_accuracy(
    test: &FilteredDataset,
    model: &NmfModel,
    tables: &ZobristTables,
    num_buckets: NumBuckets,
    legal_only: bool,
) -> Result<Accuracy, PredictError> {
    let predictor = Predictor::new(model, tables, num_buckets)?;
    let per_game: Vec<Accuracy> = test
        .games
        .par_iter()
        .map(|g| {
            let line = g.replay().map_err(|source| IngestError::Replay { game: g.game_id, source })?;
            let mut acc = Accuracy { correct: 0, total: 0, empty_bucket: 0 };
            for r in test.game_records(g) {
                let pos = &line[r.ply as usize - 1];
                acc.total += 1;
                acc.correct += (predictor.predict_move(pos, legal_only) == r.move_index) as u64;
                acc.empty_bucket += !predictor.bucket_is_trained(pos) as u64;
            }
            Ok(acc)
        })
        .collect::<Result<_, PredictError>>()?;
    Ok(per_game.iter().fold(Accuracy { correct: 0, total: 0, empty_bucket: 0 }, |a, b| Accuracy {
        correct: a.correct + b.correct,
        total: a.total + b.total,
        empty_bucket: a.empty_bucket + b.empty_bucket,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub num_buckets: u32,
    pub d: usize,
    pub scheme: Scheme,
    pub split_seed: u64,
    pub train_records: u64,
    pub test_records: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub empty_bucket_rate: f64,
    pub random_baseline: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const EVAL_CSV_HEADER: &str =
    "num_buckets,d,scheme,split_seed,train_records,test_records,correct,accuracy,empty_bucket_rate,random_baseline";

impl EvalReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{EVAL_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.num_buckets,
                r.d,
                r.scheme,
                r.split_seed,
                r.train_records,
                r.test_records,
                r.correct,
                r.accuracy,
                r.empty_bucket_rate,
                r.random_baseline
            )?;
        }
        out.flush()
    }

    pub fn read_csv(text: &str) -> Result<EvalReport, String> {
        let mut lines = text.lines();
        if lines.next() != Some(EVAL_CSV_HEADER) {
            return Err("not an evaluation report".into());
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format!("report line {}: malformed row", i + 2);
            if f.len() != 10 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
            rows.push(EvalRow {
                num_buckets: int(f[0])? as u32,
                d: int(f[1])? as usize,
                scheme: f[2].parse().map_err(|_| bad())?,
                split_seed: int(f[3])?,
                train_records: int(f[4])?,
                test_records: int(f[5])?,
                correct: int(f[6])?,
                accuracy: num(f[7])?,
                empty_bucket_rate: num(f[8])?,
                random_baseline: num(f[9])?,
            });
        }
        Ok(EvalReport { rows })
    }

    /// Mean accuracy per bucket count, in ascending bucket order.
    pub fn mean_accuracy_by_buckets(&self) -> Vec<(u32, f64)> {
        let mut counts: Vec<u32> = self.rows.iter().map(|r| r.num_buckets).collect();
        counts.sort_unstable();
        counts.dedup();
        counts
            .into_iter()
            .map(|b| {
                let accs: Vec<f64> = self.rows.iter().filter(|r| r.num_buckets == b).map(|r| r.accuracy).collect();
                (b, accs.iter().sum::<f64>() / accs.len() as f64)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub bucket_counts: Vec<u32>,
    pub split_seeds: Vec<u64>,
    pub test_fraction: f64,
    pub split_mode: SplitMode,
    pub nmf: NmfOptions,
    pub preprocessing: Preprocessing,
    pub legal_only: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            bucket_counts: vec![1, 16, 256],
            split_seeds: vec![1],
            test_fraction: 0.2,
            split_mode: SplitMode::ByGame,
            nmf: NmfOptions::default(),
            preprocessing: Preprocessing::RowNormalized,
            legal_only: false,
        }
    }
}

/// For every split seed and bucket count: annotate, count, fit, evaluate.
/// Rows come out seed-major, in the order given.
pub fn bucket_sweep(ds: &FilteredDataset, cfg: &SweepConfig, tables: &ZobristTables) -> Result<EvalReport, PredictError> {
    let mut annotated = Vec::with_capacity(cfg.bucket_counts.len());
    for &b in &cfg.bucket_counts {
        annotated.push(annotate_buckets(ds, tables, b as u64)?);
    }
    let mut report = EvalReport::default();
    for &seed in &cfg.split_seeds {
        for (ann, &b) in annotated.iter().zip(&cfg.bucket_counts) {
            let (train, test) = split_train_test(ann, cfg.test_fraction, seed, cfg.split_mode)?;
            let x = build_count_matrix(&train, Scheme::PieceBucket)?;
            let model = fit_nmf_counts(&x, cfg.preprocessing, &cfg.nmf)?;
            let acc = evaluate_accuracy(&test, &model, tables, x.num_buckets, cfg.legal_only)?;
            log::info!("buckets {b} seed {seed}: accuracy {:.5} over {} test moves", acc.rate(), acc.total);
            report.rows.push(EvalRow {
                num_buckets: b,
                d: cfg.nmf.d,
                scheme: Scheme::PieceBucket,
                split_seed: seed,
                train_records: train.num_records() as u64,
                test_records: acc.total,
                correct: acc.correct,
                accuracy: acc.rate(),
                empty_bucket_rate: acc.empty_bucket_rate(),
                random_baseline: RANDOM_BASELINE,
            });
        }
    }
    Ok(report)
}
