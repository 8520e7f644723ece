//! Engine-versus-engine game generation.
//!
//! Each game starts from the initial position and runs until checkmate,
//! stalemate, threefold repetition, the fifty-move rule or the ply cap (a
//! draw). Every engine move is checked against the legal moves before it is
//! played. Plies, not full moves, are counted throughout.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::thread;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{Color, Move, Position, Status, UciMove};
use crate::game::{record_for, GameRecord, GameResult, Termination};
use crate::uci::{random_legal_move, EngineConfig, UciError, UciSession, SEED_OPTION};
use crate::zobrist::ZobristTables;

pub const DEFAULT_MAX_PLIES: u32 = 600;

#[derive(Debug, Error)]
pub enum SelfplayError {
    #[error(transparent)]
    Engine(#[from] UciError),
    #[error("game {game} ply {ply}: engine proposed illegal move {uci}")]
    IllegalEngineMove { game: u64, ply: u32, uci: String },
    #[error("writing game records: {0}")]
    Sink(#[from] std::io::Error),
}

/// Something that picks moves.
pub trait Engine: Send {
    /// Called before each game with a seed derived from the run seed and
    /// the game id.
    fn new_game(&mut self, game_seed: u64) -> Result<(), UciError>;

    /// Move for `pos`, reached from the initial position by `history`.
    fn choose(&mut self, history: &[Move], pos: &Position) -> Result<UciMove, UciError>;

    fn close(self: Box<Self>) -> Result<(), UciError> {
        Ok(())
    }
}

/// Uniform random legal mover, in process.
pub struct RandomMover {
    rng: ChaCha8Rng,
}

impl RandomMover {
    pub fn new(seed: u64) -> Self {
        RandomMover { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Engine for RandomMover {
    fn new_game(&mut self, game_seed: u64) -> Result<(), UciError> {
        // Same derivation as the UCI path, so in-process and subprocess runs
        // of the built-in engine play identical games.
        self.rng = ChaCha8Rng::seed_from_u64(game_seed >> 1);
        Ok(())
    }

    fn choose(&mut self, _history: &[Move], pos: &Position) -> Result<UciMove, UciError> {
        let m = random_legal_move(pos, &mut self.rng)
            .ok_or_else(|| UciError::Protocol("no legal move available".into()))?;
        Ok(UciMove { source: m.source, target: m.target, promotion: m.promotion })
    }
}

/// An external engine driven over UCI.
pub struct UciEngine {
    session: UciSession,
}

impl UciEngine {
    pub fn new(session: UciSession) -> Self {
        UciEngine { session }
    }
}

impl Engine for UciEngine {
    fn new_game(&mut self, game_seed: u64) -> Result<(), UciError> {
        if self.session.has_option(SEED_OPTION) {
            self.session.set_option(SEED_OPTION, &(game_seed >> 1).to_string())?;
        }
        self.session.new_game()
    }

    fn choose(&mut self, history: &[Move], _pos: &Position) -> Result<UciMove, UciError> {
        self.session.set_position(None, history)?;
        self.session.best_move()
    }

    fn close(self: Box<Self>) -> Result<(), UciError> {
        self.session.close()
    }
}

/// Starts the engine a config describes.
pub fn launch(cfg: &EngineConfig) -> Result<Box<dyn Engine>, UciError> {
    if cfg.is_builtin() {
        Ok(Box::new(RandomMover::new(0)))
    } else {
        Ok(Box::new(UciEngine::new(UciSession::spawn(cfg)?)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfplayOptions {
    pub max_games: u64,
    pub max_plies: u32,
    pub seed: u64,
    /// Concurrent games, each with its own engine pair.
    pub jobs: usize,
}

impl Default for SelfplayOptions {
    fn default() -> Self {
        SelfplayOptions { max_games: 100, max_plies: DEFAULT_MAX_PLIES, seed: 0, jobs: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfplaySummary {
    pub games: u64,
    pub aborted: u64,
    pub white_wins: u64,
    pub black_wins: u64,
    pub draws: u64,
    pub plies: u64,
}

impl SelfplaySummary {
    fn add(&mut self, g: &GameRecord) {
        self.games += 1;
        self.plies += g.moves.len() as u64;
        match g.result {
            GameResult::WhiteWin => self.white_wins += 1,
            GameResult::BlackWin => self.black_wins += 1,
            _ => self.draws += 1,
        }
    }

    pub fn mean_plies(&self) -> f64 {
        if self.games == 0 {
            0.0
        } else {
            self.plies as f64 / self.games as f64
        }
    }
}

/// Per-color game seeds: two draws from the run seed's ChaCha stream
/// numbered by game id.
pub fn game_seeds(run_seed: u64, game_id: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(game_id);
    (rng.next_u64(), rng.next_u64())
}

/// Plays one game to termination or the ply cap.
pub fn play_game(
    game_id: u64,
    white: &mut dyn Engine,
    black: &mut dyn Engine,
    max_plies: u32,
    run_seed: u64,
    tables: &ZobristTables,
) -> Result<GameRecord, SelfplayError> {
    let (ws, bs) = game_seeds(run_seed, game_id);
    white.new_game(ws)?;
    black.new_game(bs)?;

    let mut pos = Position::initial();
    let mut hash = tables.full_hash(&pos);
    let mut history: Vec<Move> = Vec::new();
    let mut records = Vec::new();
    let termination = loop {
        let status = pos.status();
        if let Some(t) = crate::game::Termination::from_status(status) {
            break t;
        }
        if history.len() as u32 >= max_plies {
            break Termination::PlyCap;
        }
        let ply = history.len() as u32 + 1;
        let engine: &mut dyn Engine = if pos.side_to_move() == Color::White { &mut *white } else { &mut *black };
        let u = engine.choose(&history, &pos)?;
        let m = pos.find_move(u.source, u.target, u.promotion).ok_or_else(|| SelfplayError::IllegalEngineMove {
            game: game_id,
            ply,
            uci: u.to_string(),
        })?;
        records.push(record_for(game_id, ply, &pos, &m, hash));
        hash = tables.incremental_update(hash, &pos, &m);
        pos = pos.apply_move(&m).expect("validated move");
        history.push(m);
    };

    let result = match (termination, pos.status()) {
        (Termination::Checkmate, Status::Checkmate) => match pos.side_to_move() {
            Color::White => GameResult::BlackWin,
            Color::Black => GameResult::WhiteWin,
        },
        _ => GameResult::Draw,
    };
    Ok(GameRecord { game_id, start_fen: None, moves: records, result, termination })
}

enum Outcome {
    Done(GameRecord),
    Aborted(u64),
    Failed(SelfplayError),
}

/// Plays games `1..=max_games`, handing each finished record to `sink` in
/// game-id order. A game whose engine plays an illegal move is logged and
/// skipped; any other engine failure stops the run.
pub fn run_selfplay(
    white: &EngineConfig,
    black: &EngineConfig,
    opts: &SelfplayOptions,
    tables: &ZobristTables,
    mut sink: impl FnMut(&GameRecord) -> std::io::Result<()>,
) -> Result<SelfplaySummary, SelfplayError> {
    let next_id = AtomicU64::new(1);
    let (tx, rx) = mpsc::channel::<Outcome>();
    let jobs = opts.jobs.max(1).min(opts.max_games.max(1) as usize);
    let mut summary = SelfplaySummary::default();

    let sink_result = thread::scope(|scope| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let next_id = &next_id;
            scope.spawn(move || {
                let engines = launch(white).and_then(|w| launch(black).map(|b| (w, b)));
                let (mut w, mut b) = match engines {
                    Ok(pair) => pair,
                    Err(e) => {
                        let _ = tx.send(Outcome::Failed(e.into()));
                        return;
                    }
                };
                loop {
                    let id = next_id.fetch_add(1, Ordering::SeqCst);
                    if id > opts.max_games {
                        break;
                    }
                    let outcome = match play_game(id, w.as_mut(), b.as_mut(), opts.max_plies, opts.seed, tables) {
                        Ok(g) => Outcome::Done(g),
                        Err(SelfplayError::IllegalEngineMove { game, ply, uci }) => {
                            log::warn!("game {game} aborted: illegal engine move {uci} at ply {ply}");
                            Outcome::Aborted(id)
                        }
                        Err(e) => {
                            let _ = tx.send(Outcome::Failed(e));
                            return;
                        }
                    };
                    if tx.send(outcome).is_err() {
                        return;
                    }
                }
                let _ = w.close();
                let _ = b.close();
            });
        }
        drop(tx);

        // Reorder completions so the sink sees ascending game ids.
        let mut pending: BTreeMap<u64, Option<GameRecord>> = BTreeMap::new();
        let mut expected = 1u64;
        let mut failure = None;
        for outcome in rx {
            match outcome {
                Outcome::Done(g) => {
                    pending.insert(g.game_id, Some(g));
                }
                Outcome::Aborted(id) => {
                    pending.insert(id, None);
                    summary.aborted += 1;
                }
                Outcome::Failed(e) => {
                    failure.get_or_insert(e);
                    // Stop handing out new games.
                    next_id.store(u64::MAX / 2, Ordering::SeqCst);
                }
            }
            while let Some(entry) = pending.remove(&expected) {
                if let Some(g) = entry {
                    if failure.is_none() {
                        if let Err(e) = sink(&g) {
                            failure = Some(SelfplayError::Sink(e));
                            next_id.store(u64::MAX / 2, Ordering::SeqCst);
                        }
                    }
                    summary.add(&g);
                }
                expected += 1;
            }
        }
        failure.map_or(Ok(()), Err)
    });
    sink_result?;
    Ok(summary)
}
