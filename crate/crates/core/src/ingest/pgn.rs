//! A mainline PGN reader.
//!
//! Tag pairs, SAN movetext and the termination marker are read; comments,
//! variations, NAGs, move numbers and `%` escape lines are skipped. Games are
//! numbered from 1 in file order.

use rayon::prelude::*;

use super::IngestError;
use crate::chess::{parse_san, Move, Position};
use crate::game::{GameRecord, GameResult, Termination};
use crate::zobrist::ZobristTables;

/// Parses every game, failing on the first syntax error or unplayable move.
pub fn parse_pgn(bytes: &[u8], tables: &ZobristTables) -> Result<Vec<GameRecord>, IngestError> {
    let raw = split_games(&String::from_utf8_lossy(bytes))?;
    raw.par_iter().map(|g| resolve(g, tables)).collect()
}

/// Like [`parse_pgn`], but games with unplayable moves are returned as
/// diagnostics next to the games that did resolve.
pub fn parse_pgn_lenient(
    bytes: &[u8],
    tables: &ZobristTables,
) -> Result<(Vec<GameRecord>, Vec<IngestError>), IngestError> {
    let raw = split_games(&String::from_utf8_lossy(bytes))?;
    let resolved: Vec<_> = raw.par_iter().map(|g| resolve(g, tables)).collect();
    let mut games = Vec::new();
    let mut rejected = Vec::new();
    for r in resolved {
        match r {
            Ok(g) => games.push(g),
            Err(e) => rejected.push(e),
        }
    }
    Ok((games, rejected))
}

#[derive(Debug, Default)]
struct RawGame {
    id: u64,
    tags: Vec<(String, String)>,
    sans: Vec<String>,
    marker: Option<GameResult>,
}

impl RawGame {
    fn tag(&self, name: &str) -> Option<&str> {
        self.tags.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    fn is_empty(&self) -> bool {
        self.tags.is_empty() && self.sans.is_empty() && self.marker.is_none()
    }
}

fn resolve(raw: &RawGame, tables: &ZobristTables) -> Result<GameRecord, IngestError> {
    let start_fen = raw.tag("FEN").map(str::to_string);
    let mut pos = match &start_fen {
        Some(fen) => Position::from_fen(fen).map_err(|source| IngestError::Replay { game: raw.id, source })?,
        None => Position::initial(),
    };
    let mut moves: Vec<Move> = Vec::with_capacity(raw.sans.len());
    for (i, san) in raw.sans.iter().enumerate() {
        let illegal =
            |source| IngestError::IllegalSanMove { game: raw.id, ply: i as u32 + 1, san: san.clone(), source };
        let m = parse_san(&pos, san).map_err(illegal)?;
        pos = pos.apply_move(&m).map_err(illegal)?;
        moves.push(m);
    }
    let result = raw
        .tag("Result")
        .and_then(|r| r.parse().ok())
        .or(raw.marker)
        .unwrap_or(GameResult::Unknown);
    let termination = Termination::from_status(pos.status()).unwrap_or(Termination::Unterminated);
    GameRecord::from_moves(raw.id, start_fen, &moves, result, termination, tables)
        .map_err(|(_, source)| IngestError::Replay { game: raw.id, source })
}

struct Lexer<'a> {
    text: &'a [u8],
    at: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.at).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.at += 1;
        if c == b'\n' {
            self.line += 1;
            self.line_start = self.at;
        }
        Some(c)
    }

    fn column(&self) -> usize {
        self.at - self.line_start + 1
    }

    fn error(&self, message: impl Into<String>) -> IngestError {
        IngestError::PgnSyntax { line: self.line, column: self.column(), message: message.into() }
    }

    fn at_line_start(&self) -> bool {
        self.at == self.line_start
    }

    fn skip_line(&mut self) {
        while let Some(c) = self.bump() {
            if c == b'\n' {
                break;
            }
        }
    }

    fn word(&mut self) -> &'a str {
        let start = self.at;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || b"{}()[];$".contains(&c) {
                break;
            }
            self.bump();
        }
        std::str::from_utf8(&self.text[start..self.at]).unwrap_or("")
    }

    fn tag_pair(&mut self) -> Result<(String, String), IngestError> {
        self.bump();
        let rest = &self.text[self.at..];
        let end = rest.iter().position(|&c| c == b'\n').unwrap_or(rest.len());
        let body = std::str::from_utf8(&rest[..end]).map_err(|_| self.error("tag is not UTF-8"))?;
        let close = body.rfind(']').ok_or_else(|| self.error("unterminated tag pair"))?;
        let inner = body[..close].trim();
        let (name, value) = inner.split_once(char::is_whitespace).ok_or_else(|| self.error("tag pair without a value"))?;
        let value = value.trim();
        if value.len() < 2 || !value.starts_with('"') || !value.ends_with('"') {
            return Err(self.error(format!("tag `{name}` value is not a quoted string")));
        }
        let value = value[1..value.len() - 1].replace("\\\"", "\"").replace("\\\\", "\\");
        self.at += close + 1;
        Ok((name.to_string(), value))
    }
}

fn split_games(text: &str) -> Result<Vec<RawGame>, IngestError> {
    let mut lx = Lexer { text: text.as_bytes(), at: 0, line: 1, line_start: 0 };
    let mut games = Vec::new();
    let mut cur = RawGame { id: 1, ..RawGame::default() };
    let mut in_movetext = false;

    let finish = |cur: &mut RawGame, games: &mut Vec<RawGame>| {
        let next = RawGame { id: cur.id + 1, ..RawGame::default() };
        games.push(std::mem::replace(cur, next));
    };

    while let Some(c) = lx.peek() {
        match c {
            b'%' if lx.at_line_start() => lx.skip_line(),
            _ if c.is_ascii_whitespace() => {
                lx.bump();
            }
            b'[' => {
                if in_movetext {
                    return Err(lx.error("tag pair inside movetext (missing termination marker?)"));
                }
                let pair = lx.tag_pair()?;
                cur.tags.push(pair);
            }
            b'{' => {
                let (line, column) = (lx.line, lx.column());
                loop {
                    match lx.bump() {
                        Some(b'}') => break,
                        Some(_) => {}
                        None => return Err(IngestError::PgnSyntax { line, column, message: "unterminated comment".into() }),
                    }
                }
            }
            b';' => lx.skip_line(),
            b'(' => {
                let (line, column) = (lx.line, lx.column());
                let mut depth = 0usize;
                loop {
                    match lx.bump() {
                        Some(b'(') => depth += 1,
                        Some(b')') => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        Some(b'{') => {
                            while !matches!(lx.bump(), Some(b'}') | None) {}
                        }
                        Some(_) => {}
                        None => return Err(IngestError::PgnSyntax { line, column, message: "unterminated variation".into() }),
                    }
                }
            }
            b')' => return Err(lx.error("unbalanced `)`")),
            b']' | b'}' => return Err(lx.error(format!("unexpected `{}`", c as char))),
            b'$' => {
                lx.bump();
                if lx.word().parse::<u32>().is_err() {
                    return Err(lx.error("malformed NAG"));
                }
            }
            _ => {
                let column = lx.column();
                let line = lx.line;
                let word = lx.word();
                if let Ok(r) = word.parse::<GameResult>() {
                    cur.marker = Some(r);
                    finish(&mut cur, &mut games);
                    in_movetext = false;
                    continue;
                }
                // Move numbers, possibly glued to the move ("12.Nf3", "12...Nf6").
                let after = word.trim_start_matches(|c: char| c.is_ascii_digit());
                let san = if after.len() == word.len() || word.starts_with("0-0") {
                    word
                } else if after.starts_with('.') {
                    after.trim_start_matches('.')
                } else {
                    ""
                };
                if san.is_empty() && !after.starts_with('.') {
                    return Err(IngestError::PgnSyntax { line, column, message: format!("unexpected token `{word}`") });
                }
                if !san.is_empty() {
                    cur.sans.push(san.to_string());
                }
                in_movetext = true;
            }
        }
    }
    if in_movetext || !cur.is_empty() {
        return Err(lx.error(format!("game {} has no termination marker", cur.id)));
    }
    Ok(games)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::{Color, MoveFlag, Square};
    use crate::zobrist::default_tables;

    fn parse(text: &str) -> Result<Vec<GameRecord>, IngestError> {
        parse_pgn(text.as_bytes(), default_tables())
    }

    #[test]
    fn bare_movetext() {
        let games = parse("1. e4 e5 2. Nf3 1-0").unwrap();
        assert_eq!(games.len(), 1);
        let g = &games[0];
        assert_eq!(g.game_id, 1);
        assert_eq!(g.moves.len(), 3);
        assert_eq!(g.result, GameResult::WhiteWin);
        assert_eq!(g.termination, Termination::Unterminated);
        assert_eq!(g.moves[2].piece.get(), 7);
    }

    #[test]
    fn castling_san() {
        let g = &parse("1. e4 e5 2. Nf3 Nc6 3. Bc4 Bc5 4. O-O *").unwrap()[0];
        let castle = g.moves.last().unwrap();
        assert_eq!((castle.from, castle.to), (Square::E1, Square::G1));
        assert_eq!(castle.piece.get(), 5);
        assert_eq!(g.result, GameResult::Unknown);
        let pos = &g.replay().unwrap()[6];
        assert_eq!(pos.find_move(Square::E1, Square::G1, None).unwrap().flag, MoveFlag::Castle);
    }

    #[test]
    fn file_disambiguation() {
        let g = &parse("1. e4 d5 2. c4 e6 3. exd5 1/2-1/2").unwrap()[0];
        let m = g.moves.last().unwrap();
        assert_eq!(m.from, "e4".parse().unwrap());
        assert_eq!(m.piece.get(), 13);
        assert_eq!(g.result, GameResult::Draw);
    }

    #[test]
    fn tags_comments_variations_and_nags() {
        let text = r#"[Event "Test \"quoted\""]
[Site "?"]
[Result "0-1"]

1. f3 {weak} e5 $2 (1... d5 2. g4 (2. e4) e5) 2. g4?! ; rest of line
Qh4# 0-1

[Event "Second"]
[Result "1-0"]
%escaped line
1.e4 e5 2.Nf3 Nc6 3.a3 3...a6 1-0
"#;
        let games = parse(text).unwrap();
        assert_eq!(games.len(), 2);
        assert_eq!(games[0].moves.len(), 4);
        assert_eq!(games[0].result, GameResult::BlackWin);
        assert_eq!(games[0].termination, Termination::Checkmate);
        assert_eq!(games[0].moves[3].color, Color::Black);
        assert_eq!(games[1].game_id, 2);
        assert_eq!(games[1].moves.len(), 6);
        for g in &games {
            g.verify().unwrap();
        }
    }

    #[test]
    fn fen_tag_sets_start() {
        let text = "[SetUp \"1\"]\n[FEN \"4k3/8/8/8/8/8/4P3/4K3 w - - 0 1\"]\n\n1. e4 Kd7 *\n";
        let g = &parse(text).unwrap()[0];
        assert_eq!(g.start_fen.as_deref(), Some("4k3/8/8/8/8/8/4P3/4K3 w - - 0 1"));
        assert_eq!(g.moves[0].piece.get(), 13);
        g.verify().unwrap();
    }

    #[test]
    fn illegal_move_names_game_and_ply() {
        let text = "1. e4 e5 1-0\n\n1. e4 e5 2. Ke3 1-0\n";
        match parse(text) {
            Err(IngestError::IllegalSanMove { game, ply, san, .. }) => {
                assert_eq!((game, ply, san.as_str()), (2, 3, "Ke3"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let (games, rejected) = parse_pgn_lenient(text.as_bytes(), default_tables()).unwrap();
        assert_eq!(games.len(), 1);
        assert_eq!(rejected.len(), 1);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("1. e4 {open comment\n e5 1-0") {
            Err(IngestError::PgnSyntax { line: 1, column: 7, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("1. e4 e5\n2. Nf3 ) 1-0") {
            Err(IngestError::PgnSyntax { line: 2, column: 8, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("1. e4 e5"), Err(IngestError::PgnSyntax { .. })));
        assert!(matches!(parse("[Event \"x\"\n1. e4 *"), Err(IngestError::PgnSyntax { line: 1, .. })));
    }

    #[test]
    fn empty_input_has_no_games() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n  \n").unwrap().is_empty());
    }
}
