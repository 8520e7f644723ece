//! The `.mlog` move-log format.
//!
//! UTF-8, one JSON object per line. The first line is the header; each game
//! follows as its move lines in ply order and ends with a result line:
//!
//! ```text
//! {"type":"header","format":"chessvec-mlog","version":1,"zobrist_seed":42,"filtered":false}
//! {"type":"move","game":1,"ply":1,"color":"white","piece":13,"kind":"pawn","from":"e2","to":"e4","move_index":796,"hash":1234}
//! {"type":"result","game":1,"result":"1-0","termination":"checkmate","plies":57}
//! ```
//!
//! `hash` is the unsigned 64-bit Zobrist hash of the position before the
//! move under `zobrist_seed`. `bucket` appears on move lines once a bucket
//! count has been applied (`num_buckets` in the header). `filtered` marks
//! files holding only white-won games.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::game::{GameRecord, GameResult, MoveRecord, Termination};
use crate::zobrist::NumBuckets;

pub const FORMAT_NAME: &str = "chessvec-mlog";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlogHeader {
    pub format: String,
    pub version: u32,
    pub zobrist_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_buckets: Option<NumBuckets>,
    #[serde(default)]
    pub filtered: bool,
}

impl MlogHeader {
    pub fn new(zobrist_seed: u64) -> MlogHeader {
        MlogHeader {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            zobrist_seed,
            num_buckets: None,
            filtered: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameTrailer {
    pub game: u64,
    pub result: GameResult,
    pub termination: Termination,
    pub plies: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_fen: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(MlogHeader),
    Move(MoveRecord),
    Result(GameTrailer),
}

pub struct MlogWriter<W: Write> {
    out: W,
}

impl<W: Write> MlogWriter<W> {
    pub fn new(mut out: W, header: &MlogHeader) -> Result<Self, IngestError> {
        write_line(&mut out, &Line::Header(header.clone()))?;
        Ok(MlogWriter { out })
    }

    pub fn write_game(&mut self, game: &GameRecord) -> Result<(), IngestError> {
        for m in &game.moves {
            write_line(&mut self.out, &Line::Move(m.clone()))?;
        }
        let trailer = GameTrailer {
            game: game.game_id,
            result: game.result,
            termination: game.termination,
            plies: game.moves.len() as u32,
            start_fen: game.start_fen.clone(),
        };
        write_line(&mut self.out, &Line::Result(trailer))
    }

    pub fn finish(mut self) -> Result<W, IngestError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_line<W: Write>(out: &mut W, line: &Line) -> Result<(), IngestError> {
    serde_json::to_writer(&mut *out, line).map_err(|e| IngestError::Format { line: 0, message: e.to_string() })?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a whole log, checking grouping: move lines of one game with plies
/// 1, 2, 3, ... followed by its result line with a matching ply count.
pub fn read_mlog<R: BufRead>(input: R) -> Result<(MlogHeader, Vec<GameRecord>), IngestError> {
    let mut header = None;
    let mut games = Vec::new();
    let mut current: Vec<MoveRecord> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| IngestError::Format { line: lineno, message };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        match parsed {
            Line::Header(h) => {
                if header.is_some() || lineno != 1 {
                    return Err(fail("header must be the first line and appear once".into()));
                }
                if h.format != FORMAT_NAME || h.version != FORMAT_VERSION {
                    return Err(fail(format!("unsupported format {} v{}", h.format, h.version)));
                }
                header = Some(h);
            }
            _ if header.is_none() => return Err(fail("missing header".into())),
            Line::Move(m) => {
                let expected_ply = current.len() as u32 + 1;
                if let Some(first) = current.first() {
                    if first.game != m.game {
                        return Err(fail(format!("game {} starts before game {} has a result line", m.game, first.game)));
                    }
                }
                if m.ply != expected_ply {
                    return Err(fail(format!("game {} ply {} where {} was expected", m.game, m.ply, expected_ply)));
                }
                current.push(m);
            }
            Line::Result(t) => {
                if current.iter().any(|m| m.game != t.game) || t.plies as usize != current.len() {
                    return Err(fail(format!("result line for game {} does not match its moves", t.game)));
                }
                games.push(GameRecord {
                    game_id: t.game,
                    start_fen: t.start_fen,
                    moves: std::mem::take(&mut current),
                    result: t.result,
                    termination: t.termination,
                });
            }
        }
    }
    if !current.is_empty() {
        return Err(IngestError::Format { line: 0, message: "log ends inside a game".into() });
    }
    let header = header.ok_or(IngestError::Format { line: 0, message: "empty log".into() })?;
    Ok((header, games))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::Position;
    use crate::zobrist::default_tables;

    fn sample() -> GameRecord {
        let mut pos = Position::initial();
        let moves: Vec<_> = ["e2e4", "e7e5", "g1f3"]
            .iter()
            .map(|u| {
                let m = pos.parse_uci(u).unwrap();
                pos = pos.apply_move(&m).unwrap();
                m
            })
            .collect();
        GameRecord::from_moves(4, None, &moves, GameResult::WhiteWin, Termination::Unterminated, default_tables())
            .unwrap()
    }

    fn write(games: &[GameRecord]) -> Vec<u8> {
        let mut w = MlogWriter::new(Vec::new(), &MlogHeader::new(default_tables().seed())).unwrap();
        for g in games {
            w.write_game(g).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn round_trip() {
        let g = sample();
        let bytes = write(&[g.clone()]);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"type\":\"header\""));
        assert!(text.contains("\"move_index\":796"));
        let (h, games) = read_mlog(bytes.as_slice()).unwrap();
        assert_eq!(h.zobrist_seed, default_tables().seed());
        assert_eq!(games, vec![g]);
    }

    #[test]
    fn hash_is_written_as_unsigned_decimal() {
        let g = sample();
        let text = String::from_utf8(write(&[g.clone()])).unwrap();
        assert!(text.contains(&format!("\"hash\":{}", g.moves[0].hash)));
    }

    #[test]
    fn rejects_bad_grouping() {
        let text = String::from_utf8(write(&[sample()])).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(1, 2);
        assert!(matches!(read_mlog(lines.join("\n").as_bytes()), Err(IngestError::Format { line: 2, .. })));

        let truncated: Vec<&str> = text.lines().take(3).collect();
        assert!(read_mlog(truncated.join("\n").as_bytes()).is_err());

        let headless: Vec<&str> = text.lines().skip(1).collect();
        assert!(read_mlog(headless.join("\n").as_bytes()).is_err());
    }
}
