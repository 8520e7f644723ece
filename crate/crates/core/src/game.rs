//! Logged games and their per-move records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chess::{ChessError, Color, Move, MoveIndex, PieceId, PieceKind, Position, Square, Status};
use crate::zobrist::{BucketId, ZobristTables};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameResult {
    #[serde(rename = "1-0")]
    WhiteWin,
    #[serde(rename = "0-1")]
    BlackWin,
    #[serde(rename = "1/2-1/2")]
    Draw,
    /// Unfinished or unknown (PGN `*`).
    #[serde(rename = "*")]
    Unknown,
}

impl GameResult {
    pub fn as_str(self) -> &'static str {
        match self {
            GameResult::WhiteWin => "1-0",
            GameResult::BlackWin => "0-1",
            GameResult::Draw => "1/2-1/2",
            GameResult::Unknown => "*",
        }
    }
}

impl fmt::Display for GameResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameResult {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1-0" => Ok(GameResult::WhiteWin),
            "0-1" => Ok(GameResult::BlackWin),
            "1/2-1/2" => Ok(GameResult::Draw),
            "*" => Ok(GameResult::Unknown),
            _ => Err(format!("unknown result `{s}`")),
        }
    }
}

/// How a game ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Checkmate,
    Stalemate,
    DrawRepetition,
    #[serde(rename = "draw-50move")]
    DrawFiftyMove,
    /// Stopped at the self-play ply cap; scored as a draw.
    PlyCap,
    /// The record stops in a non-terminal position (resignation, adjudication).
    Unterminated,
}

impl Termination {
    pub fn from_status(status: Status) -> Option<Termination> {
        Some(match status {
            Status::Ongoing => return None,
            Status::Checkmate => Termination::Checkmate,
            Status::Stalemate => Termination::Stalemate,
            Status::DrawRepetition => Termination::DrawRepetition,
            Status::DrawFiftyMove => Termination::DrawFiftyMove,
        })
    }
}

/// One logged move. `hash` is the Zobrist hash of the position the move was
/// made from, under the seed recorded with the log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub game: u64,
    pub ply: u32,
    pub color: Color,
    /// Identity of the mover; 0 for black moves.
    pub piece: PieceId,
    /// Kind of the mover before the move.
    pub kind: PieceKind,
    pub from: Square,
    pub to: Square,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub promotion: Option<PieceKind>,
    pub move_index: MoveIndex,
    pub hash: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<BucketId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameRecord {
    pub game_id: u64,
    /// Starting FEN when the game did not begin from the standard position.
    pub start_fen: Option<String>,
    pub moves: Vec<MoveRecord>,
    pub result: GameResult,
    pub termination: Termination,
}

impl GameRecord {
    /// Builds records for a legal move sequence. Fails on the first illegal
    /// move with its 1-based ply.
    pub fn from_moves(
        game_id: u64,
        start_fen: Option<String>,
        moves: &[Move],
        result: GameResult,
        termination: Termination,
        tables: &ZobristTables,
    ) -> Result<GameRecord, (u32, ChessError)> {
        let mut pos = match &start_fen {
            Some(fen) => Position::from_fen(fen).map_err(|e| (0, e))?,
            None => Position::initial(),
        };
        let mut records = Vec::with_capacity(moves.len());
        let mut hash = tables.full_hash(&pos);
        for (i, m) in moves.iter().enumerate() {
            let ply = i as u32 + 1;
            let next = pos.apply_move(m).map_err(|e| (ply, e))?;
            let legal = pos.find_move(m.source, m.target, m.promotion).expect("applied move is legal");
            records.push(record_for(game_id, ply, &pos, &legal, hash));
            hash = tables.incremental_update(hash, &pos, &legal);
            pos = next;
        }
        Ok(GameRecord { game_id, start_fen, moves: records, result, termination })
    }

    pub fn start_position(&self) -> Result<Position, ChessError> {
        match &self.start_fen {
            Some(fen) => Position::from_fen(fen),
            None => Ok(Position::initial()),
        }
    }

    /// Positions before each move plus the final position, validating every
    /// move's legality and the recorded mover identity.
    pub fn replay(&self) -> Result<Vec<Position>, ChessError> {
        let mut line = Vec::with_capacity(self.moves.len() + 1);
        let mut pos = self.start_position()?;
        for r in &self.moves {
            let m = pos.find_move(r.from, r.to, r.promotion).ok_or_else(|| {
                ChessError::IllegalMove(format!("game {} ply {}: {}{}", self.game_id, r.ply, r.from, r.to))
            })?;
            if pos.side_to_move() != r.color || pos.occupant_piece(r.from) != r.piece {
                return Err(ChessError::IllegalMove(format!(
                    "game {} ply {}: record does not match the position",
                    self.game_id, r.ply
                )));
            }
            let next = pos.apply_move(&m)?;
            line.push(pos);
            pos = next;
        }
        line.push(pos);
        Ok(line)
    }

    /// Replays and checks that the final position agrees with the recorded
    /// termination.
    pub fn verify(&self) -> Result<(), ChessError> {
        let line = self.replay()?;
        let status = line.last().unwrap().status();
        let ok = match self.termination {
            Termination::PlyCap | Termination::Unterminated => true,
            t => Termination::from_status(status) == Some(t),
        };
        if ok {
            Ok(())
        } else {
            Err(ChessError::IllegalMove(format!(
                "game {}: recorded termination {:?} but final status is {:?}",
                self.game_id, self.termination, status
            )))
        }
    }

    pub fn white_moves(&self) -> impl Iterator<Item = &MoveRecord> {
        self.moves.iter().filter(|r| r.color == Color::White)
    }
}

pub(crate) fn record_for(game: u64, ply: u32, before: &Position, m: &Move, hash: u64) -> MoveRecord {
    let occ = before.occupant(m.source).expect("mover present");
    MoveRecord {
        game,
        ply,
        color: occ.piece.color,
        piece: before.occupant_piece(m.source),
        kind: occ.piece.kind,
        from: m.source,
        to: m.target,
        promotion: m.promotion,
        move_index: m.index(),
        hash,
        bucket: None,
    }
}
